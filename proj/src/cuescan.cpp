#include "negmt/cuescan.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "negmt/errors.hpp"
#include "negmt/text.hpp"

namespace negmt {

CueLexicon default_english_lexicon() {
  return {"en",
          {"no", "non", "not", "'t", "nothing", "without", "none", "never", "neither"},
          MatchMode::kWord};
}

CueLexicon default_chinese_lexicon() {
  // bu, mei, wu, fei, bie, wei, fou, wu
  return {"zh", {"不", "没", "无", "非", "别", "未", "否", "勿"}, MatchMode::kCharacter};
}

void validate_lexicon(const CueLexicon& lexicon) {
  if (lexicon.entries.empty()) {
    throw ValidationError("lexicon '" + lexicon.language + "' has no entries");
  }
  for (const auto& e : lexicon.entries) {
    if (e.empty()) throw ValidationError("lexicon '" + lexicon.language + "' has an empty entry");
    if (lexicon.mode == MatchMode::kWord && text::ascii_lower(e) != e) {
      throw ValidationError("lexicon '" + lexicon.language + "': word-mode entry '" + e +
                            "' is not lowercase");
    }
  }
}

CueLexicon lexicon_from_json(std::string_view body) {
  try {
    const auto j = nlohmann::json::parse(body);
    CueLexicon lex;
    lex.language = j.value("language", std::string{});
    const auto mode = j.value("match_mode", std::string("word"));
    if (mode == "word") {
      lex.mode = MatchMode::kWord;
    } else if (mode == "character") {
      lex.mode = MatchMode::kCharacter;
    } else {
      throw ValidationError("lexicon match_mode must be 'word' or 'character', got '" + mode + "'");
    }
    lex.entries = j.at("entries").get<std::vector<std::string>>();
    validate_lexicon(lex);
    return lex;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("lexicon: ") + e.what());
  }
}

CueLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return lexicon_from_json(buf.str());
}

std::vector<std::size_t> detect_cues(const std::vector<std::string>& tokens,
                                     const CueLexicon& lexicon) {
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    bool hit = false;
    if (lexicon.mode == MatchMode::kWord) {
      const auto lower = text::ascii_lower(tokens[i]);
      hit = std::find(lexicon.entries.begin(), lexicon.entries.end(), lower) != lexicon.entries.end();
    } else {
      hit = std::any_of(lexicon.entries.begin(), lexicon.entries.end(), [&](const std::string& e) {
        return tokens[i].find(e) != std::string::npos;
      });
    }
    if (hit) hits.push_back(i);
  }
  return hits;
}

std::string_view to_string(TextMode mode) {
  return mode == TextMode::kTokenized ? "tokenized" : "raw";
}

namespace {

bool is_ascii_punct(char c) {
  return c != '\'' && static_cast<unsigned char>(c) < 0x80 &&
         std::ispunct(static_cast<unsigned char>(c));
}

}  // namespace

std::vector<std::string> tokenize_line(std::string_view line, TextMode mode) {
  auto words = text::split_whitespace(line);
  if (mode == TextMode::kTokenized) return words;
  std::vector<std::string> out;
  for (const auto& w : words) {
    std::size_t b = 0, e = w.size();
    while (b < e && is_ascii_punct(w[b])) out.emplace_back(1, w[b++]);
    std::vector<std::string> tail;
    while (e > b && is_ascii_punct(w[e - 1])) tail.emplace_back(1, w[--e]);
    if (b < e) {
      const std::string core = w.substr(b, e - b);
      const auto apos = core.find('\'');
      if (apos != std::string::npos && apos > 0) {
        out.push_back(core.substr(0, apos));
        out.push_back(core.substr(apos));
      } else {
        out.push_back(core);
      }
    }
    out.insert(out.end(), tail.rbegin(), tail.rend());
  }
  return out;
}

std::string_view to_string(Quadrant q) {
  switch (q) {
    case Quadrant::kBoth:
      return "both";
    case Quadrant::kSourceOnly:
      return "src_only";
    case Quadrant::kTargetOnly:
      return "tgt_only";
    case Quadrant::kNeither:
      return "neither";
  }
  return "neither";
}

Quadrant classify_pair(const std::vector<std::string>& source,
                       const std::vector<std::string>& target, const CueLexicon& source_lexicon,
                       const CueLexicon& target_lexicon) {
  const bool s = !detect_cues(source, source_lexicon).empty();
  const bool t = !detect_cues(target, target_lexicon).empty();
  if (s && t) return Quadrant::kBoth;
  if (s) return Quadrant::kSourceOnly;
  if (t) return Quadrant::kTargetOnly;
  return Quadrant::kNeither;
}

MismatchTable MismatchTable::from_counts(std::size_t both, std::size_t source_only,
                                         std::size_t target_only, std::size_t neither) {
  MismatchTable t;
  t.counts = {both, source_only, target_only, neither};
  return t;
}

void MismatchTable::merge(const MismatchTable& o) {
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
  unreadable += o.unreadable;
}

std::size_t MismatchTable::total() const {
  return counts[0] + counts[1] + counts[2] + counts[3];
}

double MismatchTable::ratio(Quadrant q) const {
  const auto n = total();
  return n ? static_cast<double>(count(q)) / static_cast<double>(n) : 0.0;
}

double MismatchTable::mismatch_rate() const {
  return ratio(Quadrant::kSourceOnly) + ratio(Quadrant::kTargetOnly);
}

MismatchTable scan_parallel(
    std::istream& source, std::istream& target, const ScanConfig& config,
    const std::function<void(std::string_view, std::string_view, Quadrant)>& on_pair) {
  validate_lexicon(config.source_lexicon);
  validate_lexicon(config.target_lexicon);
  MismatchTable table;
  std::string s, t;
  for (;;) {
    const bool has_s = static_cast<bool>(std::getline(source, s));
    const bool has_t = static_cast<bool>(std::getline(target, t));
    if (!has_s && !has_t) break;
    if (has_s != has_t) {
      ++table.unreadable;
      continue;
    }
    text::chomp(s);
    text::chomp(t);
    if (!text::valid_utf8(s) || !text::valid_utf8(t)) {
      ++table.unreadable;
      continue;
    }
    const auto q = classify_pair(tokenize_line(s, config.text_mode),
                                 tokenize_line(t, config.text_mode), config.source_lexicon,
                                 config.target_lexicon);
    table.add(q);
    if (on_pair) on_pair(s, t, q);
  }
  if (source.bad() || target.bad()) throw IoError("read error while scanning parallel corpus");
  return table;
}

FilterPolicy parse_filter_policy(std::string_view name) {
  if (name == "drop_mismatch") return FilterPolicy::kDropMismatch;
  if (name == "keep_all_tagged") return FilterPolicy::kKeepAllTagged;
  throw UsageError("unknown filter policy '" + std::string(name) +
                   "' (expected drop_mismatch or keep_all_tagged)");
}

FilterSummary filter_matched(std::istream& source, std::istream& target, const ScanConfig& config,
                             FilterPolicy policy, const FilterSinks& sinks) {
  FilterSummary summary;
  summary.input = scan_parallel(source, target, config,
                                [&](std::string_view s, std::string_view t, Quadrant q) {
                                  const bool mismatch =
                                      q == Quadrant::kSourceOnly || q == Quadrant::kTargetOnly;
                                  if (policy == FilterPolicy::kDropMismatch && mismatch) return;
                                  if (sinks.source) *sinks.source << s << '\n';
                                  if (sinks.target) *sinks.target << t << '\n';
                                  if (policy == FilterPolicy::kKeepAllTagged && sinks.tags) {
                                    *sinks.tags << to_string(q) << '\n';
                                  }
                                  ++summary.emitted;
                                });
  return summary;
}

}  // namespace negmt
