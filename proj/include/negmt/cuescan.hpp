#pragma once

// Negation-cue lexicon matching over parallel corpora, 2x2 cue-match tables
// and mismatch filtering.

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace negmt {

enum class MatchMode { kWord, kCharacter };

struct CueLexicon {
  std::string language;
  std::vector<std::string> entries;
  MatchMode mode = MatchMode::kWord;
};

/// no, non, not, 't, nothing, without, none, never, neither
CueLexicon default_english_lexicon();
/// bu, mei, wu, fei, bie, wei, fou and a second wu
CueLexicon default_chinese_lexicon();

/// JSON: {"language": "en", "match_mode": "word"|"character", "entries": [...]}
CueLexicon load_lexicon(const std::string& path);
CueLexicon lexicon_from_json(std::string_view text);
/// Checks entries are non-empty and lowercase in word mode.
void validate_lexicon(const CueLexicon& lexicon);

/// Word mode: token equals an entry after ASCII lowercasing. Character mode:
/// token contains an entry anywhere.
std::vector<std::size_t> detect_cues(const std::vector<std::string>& tokens,
                                     const CueLexicon& lexicon);

enum class TextMode { kTokenized, kRaw };
std::string_view to_string(TextMode mode);

/// Tokenized: split on whitespace. Raw: additionally split off punctuation
/// and apostrophe clitics ("don't" -> "don", "'t").
std::vector<std::string> tokenize_line(std::string_view line, TextMode mode);

enum class Quadrant { kBoth = 0, kSourceOnly, kTargetOnly, kNeither };
std::string_view to_string(Quadrant q);

Quadrant classify_pair(const std::vector<std::string>& source,
                       const std::vector<std::string>& target, const CueLexicon& source_lexicon,
                       const CueLexicon& target_lexicon);

struct MismatchTable {
  std::array<std::size_t, 4> counts{};
  std::size_t unreadable = 0;

  static MismatchTable from_counts(std::size_t both, std::size_t source_only,
                                   std::size_t target_only, std::size_t neither);

  void add(Quadrant q) { ++counts[static_cast<std::size_t>(q)]; }
  void merge(const MismatchTable& o);
  std::size_t count(Quadrant q) const { return counts[static_cast<std::size_t>(q)]; }
  std::size_t total() const;
  /// Fraction of pairs in quadrant q; zero for an empty table.
  double ratio(Quadrant q) const;
  /// (source_only + target_only) / total.
  double mismatch_rate() const;
};

struct ScanConfig {
  CueLexicon source_lexicon = default_english_lexicon();
  CueLexicon target_lexicon = default_chinese_lexicon();
  TextMode text_mode = TextMode::kTokenized;
};

/// Line-by-line pass over two parallel streams. `on_pair` sees every readable
/// pair with its quadrant. Lines that are not valid UTF-8, or that have no
/// partner because one file is longer, are counted as unreadable.
MismatchTable scan_parallel(
    std::istream& source, std::istream& target, const ScanConfig& config,
    const std::function<void(std::string_view, std::string_view, Quadrant)>& on_pair = {});

enum class FilterPolicy { kDropMismatch, kKeepAllTagged };
FilterPolicy parse_filter_policy(std::string_view name);

struct FilterSinks {
  std::ostream* source = nullptr;
  std::ostream* target = nullptr;
  /// Quadrant per emitted line; written for kKeepAllTagged.
  std::ostream* tags = nullptr;
};

struct FilterSummary {
  MismatchTable input;
  std::size_t emitted = 0;
};

FilterSummary filter_matched(std::istream& source, std::istream& target, const ScanConfig& config,
                             FilterPolicy policy, const FilterSinks& sinks);

}  // namespace negmt
