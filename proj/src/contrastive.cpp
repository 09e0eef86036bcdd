#include "negmt/contrastive.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <unordered_map>

#include "negmt/errors.hpp"
#include "negmt/text.hpp"

namespace negmt {

using json = nlohmann::json;

namespace {

constexpr std::array<std::pair<Rule, std::string_view>, 8> kRuleNames{{
    {Rule::kNichtDel, "nicht_del"},
    {Rule::kNichtIns, "nicht_ins"},
    {Rule::kKeinToEin, "kein_to_ein"},
    {Rule::kEinToKein, "ein_to_kein"},
    {Rule::kAffixDel, "affix_del"},
    {Rule::kAffixIns, "affix_ins"},
    {Rule::kZhCueDel, "zh_cue_del"},
    {Rule::kZhCueIns, "zh_cue_ins"},
}};

constexpr std::array<std::string_view, 6> kArticleSuffixes{"", "e", "en", "em", "er", "es"};

// Frequent finite verb forms; the first one found anchors "nicht" insertion.
const std::unordered_set<std::string>& finite_verbs() {
  static const std::unordered_set<std::string> verbs{
      "ist",    "sind",   "war",    "waren",   "bin",     "bist",   "seid",   "wird",
      "werden", "wurde",  "wurden", "hat",     "haben",   "hatte",  "hatten", "habe",
      "hast",   "kann",   "können", "konnte",  "konnten", "muss",   "müssen", "musste",
      "will",   "wollen", "wollte", "soll",    "sollen",  "sollte", "darf",   "dürfen",
      "durfte", "mag",    "möchte", "gibt",    "geht",    "kommt",  "weiß",   "wäre",
      "würde",  "würden", "hätte",  "glaube",  "denke",   "funktioniert"};
  return verbs;
}

bool is_nicht(const std::string& tok) { return text::ascii_lower(tok) == "nicht"; }

/// Returns the inflection suffix when `tok` is stem + one of the article endings.
std::optional<std::string> article_suffix(const std::string& tok, std::string_view stem) {
  if (!text::starts_with_ci(tok, stem)) return std::nullopt;
  const std::string rest = text::ascii_lower(std::string_view(tok).substr(stem.size()));
  for (auto s : kArticleSuffixes) {
    if (rest == s) return std::string(std::string_view(tok).substr(stem.size()));
  }
  return std::nullopt;
}

bool is_upper_ascii(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower_ascii(char c) { return c >= 'a' && c <= 'z'; }

bool is_wordlike(const std::string& tok) {
  return std::any_of(tok.begin(), tok.end(), [](char c) {
    return is_upper_ascii(c) || is_lower_ascii(c) || static_cast<unsigned char>(c) >= 0x80 ||
           (c >= '0' && c <= '9');
  });
}

bool is_alpha_word(const std::string& tok) {
  return !tok.empty() && std::all_of(tok.begin(), tok.end(), [](char c) {
    return is_upper_ascii(c) || is_lower_ascii(c) || static_cast<unsigned char>(c) >= 0x80;
  });
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Adjective and participle endings, optionally followed by an inflection.
bool looks_adjectival(std::string_view w) {
  static constexpr std::array<std::string_view, 12> kBase{
      "ig", "lich", "bar", "sam", "haft", "isch", "end", "t", "en", "ell", "al", "iv"};
  auto base_match = [](std::string_view s) {
    return s.size() >= 3 &&
           std::any_of(kBase.begin(), kBase.end(), [s](auto b) { return ends_with(s, b); });
  };
  if (base_match(w)) return true;
  for (std::string_view infl : {"em", "en", "er", "es", "e"}) {
    if (ends_with(w, infl) && base_match(w.substr(0, w.size() - infl.size()))) return true;
  }
  return false;
}

Variant make_delete(const std::vector<std::string>& ref, std::size_t pos, Rule rule) {
  Variant v;
  v.tokens = ref;
  v.tokens.erase(v.tokens.begin() + static_cast<std::ptrdiff_t>(pos));
  v.rule = rule;
  v.direction = direction_of(rule);
  v.edit = EditKind::kDelete;
  v.position = pos;
  v.edited_token = ref[pos];
  return v;
}

Variant make_insert(const std::vector<std::string>& ref, std::size_t pos, std::string token,
                    Rule rule, bool needs_review) {
  Variant v;
  v.tokens = ref;
  v.tokens.insert(v.tokens.begin() + static_cast<std::ptrdiff_t>(pos), token);
  v.rule = rule;
  v.direction = direction_of(rule);
  v.edit = EditKind::kInsert;
  v.position = pos;
  v.edited_token = std::move(token);
  v.needs_review = needs_review;
  return v;
}

Variant make_substitute(const std::vector<std::string>& ref, std::size_t pos,
                        std::string replacement, Rule rule) {
  Variant v;
  v.tokens = ref;
  v.tokens[pos] = std::move(replacement);
  v.rule = rule;
  v.direction = direction_of(rule);
  v.edit = EditKind::kSubstitute;
  v.position = pos;
  v.edited_token = ref[pos];
  return v;
}

}  // namespace

std::string_view to_string(Direction d) {
  return d == Direction::kDeletion ? "deletion" : "insertion";
}

std::string_view to_string(Rule r) {
  for (const auto& [rule, name] : kRuleNames) {
    if (rule == r) return name;
  }
  return "unknown";
}

Direction parse_direction(std::string_view name) {
  if (name == "deletion") return Direction::kDeletion;
  if (name == "insertion") return Direction::kInsertion;
  throw ValidationError("unknown direction '" + std::string(name) + "'");
}

Rule parse_rule(std::string_view name) {
  for (const auto& [rule, n] : kRuleNames) {
    if (n == name) return rule;
  }
  throw ValidationError("unknown rule tag '" + std::string(name) + "'");
}

Direction direction_of(Rule r) {
  switch (r) {
    case Rule::kNichtDel:
    case Rule::kKeinToEin:
    case Rule::kAffixDel:
    case Rule::kZhCueDel:
      return Direction::kDeletion;
    default:
      return Direction::kInsertion;
  }
}

std::vector<std::string> revert_variant(const Variant& v) {
  std::vector<std::string> out = v.tokens;
  switch (v.edit) {
    case EditKind::kDelete:
      out.insert(out.begin() + static_cast<std::ptrdiff_t>(v.position), v.edited_token);
      break;
    case EditKind::kInsert:
      out.erase(out.begin() + static_cast<std::ptrdiff_t>(v.position));
      break;
    case EditKind::kSubstitute:
      out[v.position] = v.edited_token;
      break;
  }
  return out;
}

std::vector<Variant> gen_german_variants(const std::vector<std::string>& reference,
                                         const Vocabulary& vocabulary) {
  std::vector<Variant> out;
  bool negated = false;

  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto& tok = reference[i];
    if (is_nicht(tok)) {
      negated = true;
      out.push_back(make_delete(reference, i, Rule::kNichtDel));
    } else if (auto suffix = article_suffix(tok, "kein")) {
      negated = true;
      const std::string stem = is_upper_ascii(tok[0]) ? "Ein" : "ein";
      out.push_back(make_substitute(reference, i, stem + *suffix, Rule::kKeinToEin));
    }
  }

  // un- deletion, gated on the remainder being a known word.
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto& tok = reference[i];
    if (tok.size() <= 4 || !text::starts_with_ci(tok, "un") || !is_alpha_word(tok)) continue;
    std::string rest = tok.substr(2);
    std::vector<std::string> candidates;
    if (is_upper_ascii(tok[0]) && is_lower_ascii(rest[0])) {
      std::string cap = rest;
      cap[0] = static_cast<char>(cap[0] - 'a' + 'A');
      candidates.push_back(cap);
    }
    candidates.push_back(rest);
    for (const auto& c : candidates) {
      if (vocabulary.count(c)) {
        out.push_back(make_substitute(reference, i, c, Rule::kAffixDel));
        break;
      }
    }
  }

  if (negated) return out;

  // Insertion rules apply to affirmative references only.
  std::optional<std::size_t> verb;
  for (std::size_t i = 0; i < reference.size() && !verb; ++i) {
    if (finite_verbs().count(text::ascii_lower(reference[i]))) verb = i;
  }
  if (verb) {
    out.push_back(make_insert(reference, *verb + 1, "nicht", Rule::kNichtIns, false));
  } else {
    for (std::size_t i = 1; i <= reference.size(); ++i) {
      if (is_wordlike(reference[i - 1])) {
        out.push_back(make_insert(reference, i, "nicht", Rule::kNichtIns, true));
      }
    }
  }

  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto& tok = reference[i];
    if (auto suffix = article_suffix(tok, "ein")) {
      const std::string stem = is_upper_ascii(tok[0]) ? "Kein" : "kein";
      out.push_back(make_substitute(reference, i, stem + *suffix, Rule::kEinToKein));
    }
  }

  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto& tok = reference[i];
    if (tok.size() < 3 || is_upper_ascii(tok[0]) || text::starts_with_ci(tok, "un") ||
        !is_alpha_word(tok) || !looks_adjectival(tok)) {
      continue;
    }
    std::string negated_form = "un" + tok;
    if (vocabulary.count(negated_form)) {
      out.push_back(make_substitute(reference, i, std::move(negated_form), Rule::kAffixIns));
    }
  }
  return out;
}

std::vector<std::string> default_chinese_cues() {
  // bu, mei, wu, fei, bie
  return {"不", "没", "无", "非", "别"};
}

std::vector<Variant> gen_chinese_variants(const std::vector<std::string>& reference,
                                          const ChineseOptions& options) {
  if (!options.pos_tags.empty() && options.pos_tags.size() != reference.size()) {
    throw ValidationError("POS hints: " + std::to_string(options.pos_tags.size()) +
                          " tags for " + std::to_string(reference.size()) + " tokens");
  }
  std::vector<Variant> out;
  const std::unordered_set<std::string> cues(options.cues.begin(), options.cues.end());
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (cues.count(reference[i])) out.push_back(make_delete(reference, i, Rule::kZhCueDel));
  }
  if (!out.empty()) return out;

  const auto& insert_cues = options.insert_cues.empty() ? options.cues : options.insert_cues;
  for (const auto& cue : insert_cues) {
    for (std::size_t i = 0; i < reference.size(); ++i) {
      if (!options.pos_tags.empty()) {
        const auto& tag = options.pos_tags[i];
        if (tag.empty() || (tag[0] != 'v' && tag[0] != 'V')) continue;
      }
      out.push_back(make_insert(reference, i, cue, Rule::kZhCueIns, true));
    }
  }
  return out;
}

double sentence_logprob(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw ValidationError("sentence log-probability: no token scores");
  double sum = 0.0;
  for (std::size_t i = 0; i < token_logprobs.size(); ++i) {
    const double lp = token_logprobs[i];
    if (!(lp <= 0.0)) {
      throw ValidationError("token log-probability " + std::to_string(i) + " is " +
                            std::to_string(lp) + " (must be <= 0)");
    }
    sum += lp;
  }
  return sum;
}

bool score_instance(const ScoreRecord& record) {
  if (record.variant_logprobs.empty()) {
    throw ValidationError("instance '" + record.instance_id + "' has no variant scores");
  }
  return std::all_of(record.variant_logprobs.begin(), record.variant_logprobs.end(),
                     [&](double v) { return record.reference_logprob > v; });
}

AccuracyReport contrastive_accuracy(const std::vector<GroupedOutcome>& outcomes,
                                    const std::vector<std::string>& expected_groups) {
  struct Tally {
    std::size_t n = 0;
    std::size_t correct = 0;
    void add(bool ok) {
      ++n;
      if (ok) ++correct;
    }
  };
  std::map<std::pair<Direction, std::string>, Tally> groups;
  std::map<Direction, Tally> by_direction;
  Tally overall;
  for (const auto& o : outcomes) {
    groups[{o.direction, o.group}].add(o.correct);
    by_direction[o.direction].add(o.correct);
    overall.add(o.correct);
  }

  AccuracyReport report;
  for (const auto& g : expected_groups) {
    const bool present = std::any_of(groups.begin(), groups.end(),
                                     [&](const auto& kv) { return kv.first.second == g; });
    if (!present) report.warnings.push_back("group '" + g + "' has no records; omitted");
  }
  auto row = [](std::string group, std::string direction, const Tally& t) {
    return AccuracyRow{std::move(group), std::move(direction), t.n, t.correct,
                       static_cast<double>(t.correct) / static_cast<double>(t.n)};
  };
  for (const auto& [key, tally] : groups) {
    report.rows.push_back(row(key.second, std::string(to_string(key.first)), tally));
  }
  for (const auto& [dir, tally] : by_direction) {
    report.rows.push_back(row("all", std::string(to_string(dir)), tally));
  }
  if (overall.n > 0) report.rows.push_back(row("all", "all", overall));
  return report;
}

namespace {

std::string_view to_string(EditKind e) {
  switch (e) {
    case EditKind::kDelete:
      return "delete";
    case EditKind::kInsert:
      return "insert";
    case EditKind::kSubstitute:
      return "substitute";
  }
  return "delete";
}

EditKind parse_edit(std::string_view s) {
  if (s == "delete") return EditKind::kDelete;
  if (s == "insert") return EditKind::kInsert;
  if (s == "substitute") return EditKind::kSubstitute;
  throw ValidationError("unknown edit kind '" + std::string(s) + "'");
}

}  // namespace

std::string to_jsonl(const ContrastiveInstance& instance) {
  json j;
  j["instance_id"] = instance.instance_id;
  j["source_tokens"] = instance.source_tokens;
  j["reference_tokens"] = instance.reference_tokens;
  j["variants"] = json::array();
  for (const auto& v : instance.variants) {
    j["variants"].push_back({{"tokens", v.tokens},
                             {"rule", to_string(v.rule)},
                             {"direction", to_string(v.direction)},
                             {"edit", to_string(v.edit)},
                             {"position", v.position},
                             {"edited_token", v.edited_token},
                             {"needs_review", v.needs_review}});
  }
  return j.dump();
}

ContrastiveInstance instance_from_jsonl(std::string_view line) {
  try {
    const auto j = json::parse(line);
    ContrastiveInstance inst;
    inst.instance_id = j.at("instance_id").get<std::string>();
    inst.source_tokens = j.value("source_tokens", std::vector<std::string>{});
    inst.reference_tokens = j.at("reference_tokens").get<std::vector<std::string>>();
    for (const auto& jv : j.at("variants")) {
      Variant v;
      v.tokens = jv.at("tokens").get<std::vector<std::string>>();
      v.rule = parse_rule(jv.at("rule").get<std::string>());
      v.direction = parse_direction(jv.at("direction").get<std::string>());
      v.edit = parse_edit(jv.value("edit", std::string("delete")));
      v.position = jv.value("position", std::size_t{0});
      v.edited_token = jv.value("edited_token", std::string{});
      v.needs_review = jv.value("needs_review", false);
      if (v.tokens == inst.reference_tokens) {
        throw ValidationError("instance '" + inst.instance_id +
                              "': variant identical to the reference");
      }
      inst.variants.push_back(std::move(v));
    }
    return inst;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("contrastive set record: ") + e.what());
  }
}

std::vector<ContrastiveInstance> read_contrastive_set(std::istream& in) {
  std::vector<ContrastiveInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(instance_from_jsonl(line));
    } catch (const ValidationError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

std::vector<TokenScores> read_score_file(std::istream& in) {
  std::vector<TokenScores> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      TokenScores s;
      s.instance_id = j.at("instance_id").get<std::string>();
      s.reference = j.at("reference").get<std::vector<double>>();
      s.variants = j.at("variants").get<std::vector<std::vector<double>>>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("score record: ") + e.what());
    }
  }
  return out;
}

std::vector<GroupedOutcome> score_contrastive_set(const std::vector<ContrastiveInstance>& set,
                                                  const std::vector<TokenScores>& scores,
                                                  std::vector<std::string>* warnings) {
  std::unordered_map<std::string, const TokenScores*> by_id;
  for (const auto& s : scores) by_id[s.instance_id] = &s;

  std::vector<GroupedOutcome> outcomes;
  for (const auto& inst : set) {
    auto it = by_id.find(inst.instance_id);
    if (it == by_id.end()) {
      if (warnings) warnings->push_back("no scores for instance '" + inst.instance_id + "'");
      continue;
    }
    const TokenScores& s = *it->second;
    if (s.variants.size() != inst.variants.size()) {
      throw ValidationError("instance '" + inst.instance_id + "': " +
                            std::to_string(s.variants.size()) + " variant scores for " +
                            std::to_string(inst.variants.size()) + " variants");
    }
    const double ref = sentence_logprob(s.reference);
    std::map<Rule, ScoreRecord> per_rule;
    for (std::size_t v = 0; v < inst.variants.size(); ++v) {
      auto& rec = per_rule[inst.variants[v].rule];
      rec.instance_id = inst.instance_id;
      rec.reference_logprob = ref;
      rec.variant_logprobs.push_back(sentence_logprob(s.variants[v]));
    }
    for (const auto& [rule, rec] : per_rule) {
      outcomes.push_back({std::string(to_string(rule)), direction_of(rule), score_instance(rec)});
    }
  }
  return outcomes;
}

}  // namespace negmt
