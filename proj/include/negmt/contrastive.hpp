#pragma once

// Polarity-flipped contrastive variants and reference-vs-variant scoring.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace negmt {

enum class Direction { kDeletion, kInsertion };

/// Rule inventory. The first six are the German polarity rules, the last two
/// the Chinese cue deletion/insertion rules.
enum class Rule {
  kNichtDel,
  kNichtIns,
  kKeinToEin,
  kEinToKein,
  kAffixDel,
  kAffixIns,
  kZhCueDel,
  kZhCueIns,
};

std::string_view to_string(Direction d);
std::string_view to_string(Rule r);
Direction parse_direction(std::string_view name);
Rule parse_rule(std::string_view name);
Direction direction_of(Rule r);

/// How a variant was derived from the reference: which token slot changed and
/// what the reference held there (for deletions and substitutions) or what was
/// inserted.
enum class EditKind { kDelete, kInsert, kSubstitute };

struct Variant {
  std::vector<std::string> tokens;
  Rule rule = Rule::kNichtDel;
  Direction direction = Direction::kDeletion;
  EditKind edit = EditKind::kDelete;
  /// Reference index for deletions/substitutions, variant index for insertions.
  std::size_t position = 0;
  /// Reference token for deletions/substitutions, inserted token for insertions.
  std::string edited_token;
  /// Proposals that need a human grammaticality check.
  bool needs_review = false;
};

/// Undoes the single-site edit recorded in `v`.
std::vector<std::string> revert_variant(const Variant& v);

struct ContrastiveInstance {
  std::string instance_id;
  std::vector<std::string> source_tokens;
  std::vector<std::string> reference_tokens;
  std::vector<Variant> variants;
};

using Vocabulary = std::unordered_set<std::string>;

/// German polarity rules. Insertion rules only fire on references without a
/// "nicht" or "kein*" token.
std::vector<Variant> gen_german_variants(const std::vector<std::string>& reference,
                                         const Vocabulary& vocabulary);

/// bu, mei, wu, fei, bie
std::vector<std::string> default_chinese_cues();

struct ChineseOptions {
  std::vector<std::string> cues = default_chinese_cues();
  /// Cues proposed for insertion. Empty means `cues`.
  std::vector<std::string> insert_cues;
  /// Optional per-token POS tags; when present, insertion sites are limited to
  /// positions before verb-like tokens (tag starting with 'v' or 'V').
  std::vector<std::string> pos_tags;
};

std::vector<Variant> gen_chinese_variants(const std::vector<std::string>& reference,
                                          const ChineseOptions& options = {});

/// Sum of token log-probabilities (natural log).
double sentence_logprob(std::span<const double> token_logprobs);

struct ScoreRecord {
  std::string instance_id;
  double reference_logprob = 0.0;
  std::vector<double> variant_logprobs;
};

/// True iff the reference strictly outscores every variant. Ties count as errors.
bool score_instance(const ScoreRecord& record);

struct GroupedOutcome {
  std::string group;
  Direction direction = Direction::kDeletion;
  bool correct = false;
};

struct AccuracyRow {
  std::string group;
  /// "deletion", "insertion" or "all".
  std::string direction;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct AccuracyReport {
  std::vector<AccuracyRow> rows;
  std::vector<std::string> warnings;
};

/// Per-group accuracy, then per-direction rows and an overall row (group
/// "all"). Groups named in `expected_groups` that have no records are reported
/// as warnings.
AccuracyReport contrastive_accuracy(const std::vector<GroupedOutcome>& outcomes,
                                    const std::vector<std::string>& expected_groups = {});

// JSON-lines I/O.
std::string to_jsonl(const ContrastiveInstance& instance);
ContrastiveInstance instance_from_jsonl(std::string_view line);
std::vector<ContrastiveInstance> read_contrastive_set(std::istream& in);

/// Score file line: {"instance_id": ..., "reference": [token lps], "variants": [[...], ...]}
struct TokenScores {
  std::string instance_id;
  std::vector<double> reference;
  std::vector<std::vector<double>> variants;
};
std::vector<TokenScores> read_score_file(std::istream& in);

/// Turns a contrastive set plus token scores into one outcome per
/// (instance, rule): the reference against that rule's variants.
std::vector<GroupedOutcome> score_contrastive_set(const std::vector<ContrastiveInstance>& set,
                                                  const std::vector<TokenScores>& scores,
                                                  std::vector<std::string>* warnings = nullptr);

}  // namespace negmt
