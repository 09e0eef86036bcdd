#include "negmt/negdata.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "negmt/errors.hpp"
#include "negmt/text.hpp"

namespace negmt {

std::vector<Span> spans_from_indices(const std::vector<int>& sorted_indices) {
  std::vector<Span> spans;
  for (int i : sorted_indices) {
    if (!spans.empty() && spans.back().last + 1 == i) {
      spans.back().last = i;
    } else {
      spans.push_back({i, i});
    }
  }
  return spans;
}

std::vector<int> indices_from_spans(const std::vector<Span>& spans) {
  std::vector<int> out;
  for (const auto& s : spans) {
    for (int i = s.first; i <= s.last; ++i) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  const auto lower = text::ascii_lower(name);
  if (lower == "train") return Split::kTrain;
  if (lower == "dev") return Split::kDev;
  if (lower == "test") return Split::kTest;
  throw UsageError("unknown split '" + std::string(name) + "' (expected train, dev or test)");
}

std::vector<ParallelPair> pair_sentences(const std::vector<AnnotatedSentence>& source,
                                         const std::vector<AnnotatedSentence>& target,
                                         Split split) {
  std::unordered_map<std::string, const AnnotatedSentence*> by_id;
  for (const auto& s : target) by_id.emplace(s.sentence_id, &s);
  std::vector<ParallelPair> pairs;
  for (const auto& s : source) {
    auto it = by_id.find(s.sentence_id);
    if (it == by_id.end()) continue;
    pairs.push_back({s, *it->second, s.sentence_id, split});
  }
  return pairs;
}

namespace {

void check_spans(const std::vector<Span>& spans, int length, std::string_view what,
                 const std::string& where) {
  std::vector<Span> sorted = spans;
  std::sort(sorted.begin(), sorted.end(),
            [](const Span& a, const Span& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& s = sorted[i];
    if (s.first < 0 || s.last < s.first || s.last >= length) {
      throw ValidationError(where + ": " + std::string(what) + " span [" + std::to_string(s.first) +
                            "," + std::to_string(s.last) + "] outside sentence of length " +
                            std::to_string(length));
    }
    if (i > 0 && sorted[i - 1].last >= s.first) {
      throw ValidationError(where + ": overlapping " + std::string(what) + " spans");
    }
  }
}

}  // namespace

void validate_sentence(const AnnotatedSentence& sentence) {
  const std::string where = "sentence '" + sentence.sentence_id + "'";
  if (sentence.tokens.empty() && !sentence.instances.empty()) {
    throw ValidationError(where + ": negation instances on an empty sentence");
  }
  const int length = static_cast<int>(sentence.tokens.size());
  for (const auto& inst : sentence.instances) {
    const std::string w = where + " instance " + std::to_string(inst.instance_id);
    if (inst.cue_spans.empty()) throw ValidationError(w + ": instance has no cue");
    check_spans(inst.cue_spans, length, "cue", w);
    check_spans(inst.event_spans, length, "event", w);
    check_spans(inst.scope_spans, length, "scope", w);
    for (const auto& ev : inst.event_spans) {
      for (int i = ev.first; i <= ev.last; ++i) {
        const bool in_scope = std::any_of(inst.scope_spans.begin(), inst.scope_spans.end(),
                                          [i](const Span& s) { return s.contains(i); });
        if (!in_scope) {
          throw ValidationError(w + ": event token " + std::to_string(i) + " ('" +
                                sentence.tokens[static_cast<std::size_t>(i)] +
                                "') is not inside the scope");
        }
      }
    }
  }
}

namespace {

struct Row {
  std::size_t line;
  std::vector<std::string> fields;
};

int parse_int(const std::string& s, std::size_t line, std::string_view what) {
  int value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(line, "expected integer " + std::string(what) + ", got '" + s + "'");
  }
  return value;
}

AnnotatedSentence build_sentence(const std::vector<Row>& rows) {
  const std::size_t ncols = rows.front().fields.size();
  const bool no_negation = ncols == 4 && rows.front().fields[3] == "***";
  const std::size_t groups = no_negation ? 0 : (ncols - 3) / 3;

  AnnotatedSentence sentence;
  sentence.sentence_id = rows.front().fields[0];
  const int n = static_cast<int>(rows.size());
  const std::string where = "sentence '" + sentence.sentence_id + "' (line " +
                            std::to_string(rows.front().line) + ")";
  sentence.tokens.assign(rows.size(), {});
  std::vector<int> row_of_token(rows.size(), -1);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields[0] != sentence.sentence_id) {
      throw ParseError(row.line, "sentence id '" + row.fields[0] + "' differs from block id '" +
                                     sentence.sentence_id + "' (missing blank line?)");
    }
    const int tid = parse_int(row.fields[1], row.line, "token id");
    if (tid < 0 || tid >= n) {
      throw ValidationError(where + ": token id " + std::to_string(tid) +
                            " out of range for a sentence of " + std::to_string(n) + " tokens");
    }
    if (row_of_token[static_cast<std::size_t>(tid)] != -1) {
      throw ValidationError(where + ": duplicate token id " + std::to_string(tid));
    }
    row_of_token[static_cast<std::size_t>(tid)] = static_cast<int>(r);
    sentence.tokens[static_cast<std::size_t>(tid)] = row.fields[2];
  }

  for (std::size_t g = 0; g < groups; ++g) {
    std::array<std::vector<int>, 3> marked;
    for (int t = 0; t < n; ++t) {
      const auto& row = rows[static_cast<std::size_t>(row_of_token[static_cast<std::size_t>(t)])];
      for (std::size_t c = 0; c < 3; ++c) {
        if (row.fields[3 + 3 * g + c] != "_") marked[c].push_back(t);
      }
    }
    NegInstance inst;
    inst.instance_id = static_cast<int>(g);
    inst.cue_spans = spans_from_indices(marked[0]);
    inst.event_spans = spans_from_indices(marked[1]);
    inst.scope_spans = spans_from_indices(marked[2]);
    sentence.instances.push_back(std::move(inst));
  }
  try {
    validate_sentence(sentence);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(e.what()) + " (block at line " +
                          std::to_string(rows.front().line) + ")");
  }
  return sentence;
}

}  // namespace

std::vector<AnnotatedSentence> parse_negpar(std::istream& in) {
  std::vector<AnnotatedSentence> corpus;
  std::vector<Row> block;
  std::string line;
  std::size_t lineno = 0;

  auto flush = [&] {
    if (!block.empty()) corpus.push_back(build_sentence(block));
    block.clear();
  };

  while (std::getline(in, line)) {
    ++lineno;
    text::chomp(line);
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (text::trim(line).empty()) {
      flush();
      continue;
    }
    Row row{lineno, text::split(line, '\t')};
    const std::size_t ncols = row.fields.size();
    const bool no_negation = ncols == 4 && row.fields[3] == "***";
    if (ncols < 3 || (!no_negation && (ncols - 3) % 3 != 0)) {
      throw ParseError(lineno, "expected 3 + 3k tab-separated columns, got " +
                                   std::to_string(ncols));
    }
    if (!block.empty() && block.front().fields.size() != ncols) {
      throw ParseError(lineno, "column count " + std::to_string(ncols) +
                                   " differs from the sentence's first row (" +
                                   std::to_string(block.front().fields.size()) + ")");
    }
    if (row.fields[2].empty()) throw ParseError(lineno, "empty token surface");
    block.push_back(std::move(row));
  }
  flush();
  return corpus;
}

std::vector<AnnotatedSentence> parse_negpar_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotation file '" + path + "'");
  return parse_negpar(in);
}

void write_negpar(std::ostream& out, const std::vector<AnnotatedSentence>& corpus) {
  for (const auto& sentence : corpus) {
    validate_sentence(sentence);
    if (sentence.tokens.empty()) {
      throw ValidationError("sentence '" + sentence.sentence_id + "' has no tokens");
    }
    for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
      const auto& tok = sentence.tokens[t];
      out << sentence.sentence_id << '\t' << t << '\t' << tok;
      const std::string mark = tok == "_" ? "*" : tok;
      const int ti = static_cast<int>(t);
      auto cell = [&](const std::vector<Span>& spans) {
        const bool on = std::any_of(spans.begin(), spans.end(),
                                    [ti](const Span& s) { return s.contains(ti); });
        out << '\t' << (on ? mark : "_");
      };
      for (const auto& inst : sentence.instances) {
        cell(inst.cue_spans);
        cell(inst.event_spans);
        cell(inst.scope_spans);
      }
      out << '\n';
    }
    out << '\n';
  }
}

ComponentCounts corpus_stats(const std::vector<AnnotatedSentence>& corpus) {
  ComponentCounts counts;
  for (const auto& s : corpus) {
    ++counts.sentences;
    for (const auto& inst : s.instances) {
      ++counts.instances;
      if (!inst.cue_spans.empty()) ++counts.cue;
      if (inst.has_event()) ++counts.event;
      if (inst.has_scope()) ++counts.scope;
    }
  }
  return counts;
}

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return !suffix.empty() && s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::vector<std::string> merge_subwords(const std::vector<std::string>& subwords,
                                        std::string_view marker) {
  std::vector<std::string> words;
  std::string current;
  bool open = false;
  for (const auto& sw : subwords) {
    if (ends_with(sw, marker)) {
      current += sw.substr(0, sw.size() - marker.size());
      open = true;
    } else {
      current += sw;
      words.push_back(std::move(current));
      current.clear();
      open = false;
    }
  }
  if (open) words.push_back(std::move(current));
  return words;
}

SubwordAlignment align_subwords(const std::vector<std::string>& words,
                                const std::vector<std::string>& subwords,
                                std::string_view marker) {
  SubwordAlignment alignment;
  std::string current;
  int start = 0;
  std::size_t w = 0;
  auto close_word = [&](int last) {
    if (w >= words.size()) {
      throw ValidationError("subword alignment: subwords continue past the last word ('" +
                            current + "' is extra)");
    }
    if (current != words[w]) {
      throw ValidationError("subword alignment: word " + std::to_string(w) + " '" + words[w] +
                            "' diverges from reconstructed '" + current + "'");
    }
    alignment.word_to_subwords.push_back({start, last});
    ++w;
    current.clear();
    start = last + 1;
  };
  for (std::size_t j = 0; j < subwords.size(); ++j) {
    const auto& sw = subwords[j];
    if (ends_with(sw, marker)) {
      current += sw.substr(0, sw.size() - marker.size());
      if (j + 1 == subwords.size()) close_word(static_cast<int>(j));
    } else {
      current += sw;
      close_word(static_cast<int>(j));
    }
  }
  if (w != words.size()) {
    throw ValidationError("subword alignment: word " + std::to_string(w) + " '" + words[w] +
                          "' has no subwords");
  }
  return alignment;
}

std::string_view to_string(Category category) {
  switch (category) {
    case Category::kCorrect:
      return "Correct";
    case Category::kRephrased:
      return "Rephrased";
    case Category::kReordered:
      return "Reordered";
    case Category::kIncorrect:
      return "Incorrect";
    case Category::kDropped:
      return "Dropped";
  }
  return "Correct";
}

Category parse_category(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    const auto c = static_cast<Category>(i);
    if (name == to_string(c)) return c;
  }
  throw ValidationError("unknown category '" + std::string(name) +
                        "' (expected Correct, Rephrased, Reordered, Incorrect or Dropped)");
}

std::vector<ManualEvalLabel> read_manual_labels(std::istream& in) {
  std::vector<ManualEvalLabel> labels;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    text::chomp(line);
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (text::trim(line).empty()) continue;
    if (!header) {
      if (line != "pair_id,category") {
        throw ParseError(lineno, "expected header 'pair_id,category', got '" + line + "'");
      }
      header = true;
      continue;
    }
    const auto fields = text::split(line, ',');
    if (fields.size() != 2) {
      throw ParseError(lineno, "expected 2 comma-separated fields, got " +
                                   std::to_string(fields.size()));
    }
    try {
      labels.push_back({std::string(text::trim(fields[0])), parse_category(text::trim(fields[1]))});
    } catch (const ValidationError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  if (!header) throw ParseError(lineno, "missing header 'pair_id,category'");
  return labels;
}

ManualSummary aggregate_manual(const std::vector<ManualEvalLabel>& labels) {
  if (labels.empty()) {
    throw ValidationError("manual evaluation: no labels, accuracy is undefined");
  }
  ManualSummary summary;
  for (const auto& l : labels) ++summary.counts[static_cast<std::size_t>(l.category)];
  summary.total = labels.size();
  const double total = static_cast<double>(summary.total);
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    summary.percentages[i] = 100.0 * static_cast<double>(summary.counts[i]) / total;
  }
  summary.accuracy = static_cast<double>(summary.counts[0] + summary.counts[1]) / total;
  return summary;
}

}  // namespace negmt
