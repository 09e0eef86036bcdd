#pragma once

// Negation-annotated corpora: data model, column-file ingestion, subword
// alignment and manual-evaluation bookkeeping.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace negmt {

/// Inclusive token range [first, last].
struct Span {
  int first = 0;
  int last = 0;

  int size() const { return last - first + 1; }
  bool contains(int i) const { return i >= first && i <= last; }
  friend bool operator==(const Span&, const Span&) = default;
};

/// Collapse a sorted list of token indices into maximal inclusive runs.
std::vector<Span> spans_from_indices(const std::vector<int>& sorted_indices);
std::vector<int> indices_from_spans(const std::vector<Span>& spans);

struct NegInstance {
  int instance_id = 0;
  std::vector<Span> cue_spans;
  std::vector<Span> event_spans;
  std::vector<Span> scope_spans;

  bool has_event() const { return !event_spans.empty(); }
  bool has_scope() const { return !scope_spans.empty(); }
  friend bool operator==(const NegInstance&, const NegInstance&) = default;
};

struct AnnotatedSentence {
  std::string sentence_id;
  std::vector<std::string> tokens;
  std::vector<NegInstance> instances;

  friend bool operator==(const AnnotatedSentence&, const AnnotatedSentence&) = default;
};

enum class Split { kTrain, kDev, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct ParallelPair {
  AnnotatedSentence source;
  AnnotatedSentence target;
  std::string pair_id;
  Split split = Split::kTrain;
};

/// Join two sides of a corpus on sentence id. Sentences present on only one
/// side are dropped.
std::vector<ParallelPair> pair_sentences(const std::vector<AnnotatedSentence>& source,
                                         const std::vector<AnnotatedSentence>& target,
                                         Split split);

/// Checks the NegInstance invariants against a sentence. Throws ValidationError.
void validate_sentence(const AnnotatedSentence& sentence);

/// Reads the token-per-row, tab-separated annotation layout:
///
///   sentence-id  token-id  surface  [cue  event  scope]*
///
/// Blank lines separate sentences. A marker column holding "_" means the
/// token is not part of that component; any other value marks it. A single
/// trailing "***" column is accepted as "no negation".
std::vector<AnnotatedSentence> parse_negpar(std::istream& in);
std::vector<AnnotatedSentence> parse_negpar_file(const std::string& path);

/// Inverse of parse_negpar. Marked cells carry the token surface.
void write_negpar(std::ostream& out, const std::vector<AnnotatedSentence>& corpus);

struct ComponentCounts {
  std::size_t sentences = 0;
  std::size_t instances = 0;
  std::size_t cue = 0;
  std::size_t event = 0;
  std::size_t scope = 0;

  friend bool operator==(const ComponentCounts&, const ComponentCounts&) = default;
};

/// Number of negation instances having a cue, an event and a scope.
ComponentCounts corpus_stats(const std::vector<AnnotatedSentence>& corpus);

struct SubwordAlignment {
  std::vector<Span> word_to_subwords;

  std::size_t word_count() const { return word_to_subwords.size(); }
  std::size_t subword_count() const {
    return word_to_subwords.empty() ? 0 : static_cast<std::size_t>(word_to_subwords.back().last + 1);
  }
};

inline constexpr std::string_view kDefaultContinuationMarker = "@@";

/// Maps each word onto the contiguous run of subwords that spell it. A subword
/// ending in `marker` continues into the next subword.
SubwordAlignment align_subwords(const std::vector<std::string>& words,
                                const std::vector<std::string>& subwords,
                                std::string_view marker = kDefaultContinuationMarker);

/// Rebuilds word tokens from marker-suffixed subwords.
std::vector<std::string> merge_subwords(const std::vector<std::string>& subwords,
                                        std::string_view marker = kDefaultContinuationMarker);

enum class Category { kCorrect = 0, kRephrased, kReordered, kIncorrect, kDropped };
inline constexpr std::size_t kCategoryCount = 5;

std::string_view to_string(Category category);
Category parse_category(std::string_view name);

struct ManualEvalLabel {
  std::string pair_id;
  Category category = Category::kCorrect;
};

/// Reads `pair_id,category` CSV with that exact header.
std::vector<ManualEvalLabel> read_manual_labels(std::istream& in);

struct ManualSummary {
  std::array<std::size_t, kCategoryCount> counts{};
  std::array<double, kCategoryCount> percentages{};
  std::size_t total = 0;
  /// (Correct + Rephrased) / total, as a fraction.
  double accuracy = 0.0;
};

ManualSummary aggregate_manual(const std::vector<ManualEvalLabel>& labels);

}  // namespace negmt
