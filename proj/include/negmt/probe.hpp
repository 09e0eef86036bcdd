#pragma once

// One-hidden-layer probing classifiers over exported hidden states.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "negmt/negdata.hpp"
#include "negmt/tracestore.hpp"

namespace negmt {

enum class ProbeTask { kCue, kScope, kEvent };
enum class TraceSide { kEncoder, kDecoder };
enum class Pooling { kWordMean, kSubword };

std::string_view to_string(ProbeTask task);
std::string_view to_string(TraceSide side);
ProbeTask parse_probe_task(std::string_view name);
TraceSide parse_trace_side(std::string_view name);

/// Class indices: 0 = others, 1 = cue, 2 = scope or event (tri-class tasks).
inline constexpr int kOthersClass = 0;
inline constexpr int kCueClass = 1;
inline constexpr int kSpanClass = 2;

int class_count(ProbeTask task);
/// Class whose F1 drives model selection: cue for the cue task, scope/event otherwise.
int selection_class(ProbeTask task);

struct ProbeExample {
  std::vector<double> vector;
  int label = kOthersClass;
};

struct ProbeDataset {
  std::vector<ProbeExample> examples;
  std::size_t dim = 0;
  std::vector<std::string> warnings;

  Eigen::MatrixXd features() const;
  std::vector<int> labels() const;
};

/// Per-word labels for one sentence under `task`. Precedence on overlap is
/// cue > event > scope > others.
std::vector<int> word_labels(const AnnotatedSentence& sentence, ProbeTask task);

/// Hidden state matrix for one side and layer of a trace: [tokens][D].
/// Encoder layers run 0 (embeddings) .. L_e, decoder layers 1 .. L_d.
Eigen::MatrixXd hidden_states(const ModelTrace& trace, TraceSide side, std::size_t layer);

/// Word (or subword) vectors pooled from hidden states, paired with the
/// corpus sentence whose id equals the trace pair id.
struct TokenVectors {
  std::vector<Eigen::VectorXd> vectors;
  /// Word index of each vector.
  std::vector<std::size_t> word_index;
};
TokenVectors pooled_vectors(const AnnotatedSentence& sentence, const ModelTrace& trace,
                            TraceSide side, std::size_t layer, Pooling pooling = Pooling::kWordMean,
                            std::string_view marker = kDefaultContinuationMarker);

ProbeDataset token_dataset(const std::vector<AnnotatedSentence>& corpus, const TraceSet& traces,
                           TraceSide side, std::size_t layer, ProbeTask task,
                           Pooling pooling = Pooling::kWordMean,
                           std::string_view marker = kDefaultContinuationMarker);

struct ProbeMetadata {
  ProbeTask task = ProbeTask::kCue;
  TraceSide side = TraceSide::kEncoder;
  std::size_t layer = 0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t seeds = 0;
  double best_dev_f1 = 0.0;
  std::size_t epoch_selected = 0;
};

struct ProbeModel {
  Eigen::MatrixXd w1;  // hidden x D
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // classes x hidden
  Eigen::VectorXd b2;  // classes
  ProbeMetadata metadata;

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden_size() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t classes() const { return static_cast<std::size_t>(w2.rows()); }

  static ProbeModel zeros(std::size_t input_dim, std::size_t hidden, std::size_t classes);
  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  static ProbeModel random(std::size_t input_dim, std::size_t hidden, std::size_t classes,
                           std::uint64_t seed);
};

/// Softmax class probabilities for one input.
Eigen::VectorXd mlp_forward(const ProbeModel& model, const Eigen::VectorXd& x);
/// Row-wise probabilities for a batch [N][D].
Eigen::MatrixXd mlp_forward_batch(const ProbeModel& model, const Eigen::MatrixXd& x);
std::vector<int> predict(const ProbeModel& model, const Eigen::MatrixXd& x);

struct ProbeGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

/// Mean cross-entropy over the batch and its analytic gradients.
double cross_entropy(const ProbeModel& model, const Eigen::MatrixXd& x,
                     const std::vector<int>& labels, ProbeGradients* grads = nullptr);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t seeds = 5;
  std::uint64_t base_seed = 1;
  std::size_t hidden = 512;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One model per seed (base_seed, base_seed + 1, ...). Each is the snapshot,
/// among epoch 0 (untrained) through `epochs`, with the highest dev F1 on the
/// selection class; ties keep the earliest epoch. Full-batch Adam updates.
std::vector<ProbeModel> train_probe(const ProbeDataset& train, const ProbeDataset& dev,
                                    ProbeTask task, const TrainConfig& config = {});

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Harmonic mean; zero when precision + recall is zero.
double f1_score(double precision, double recall);

/// Token-level precision/recall/F1 for each class in `positive_classes`, in order.
std::vector<PRF> evaluate(const std::vector<int>& predictions, const std::vector<int>& gold,
                          const std::vector<int>& positive_classes);
PRF evaluate(const std::vector<int>& predictions, const std::vector<int>& gold, int positive_class);

/// Field-wise arithmetic mean (tp/fp/fn are summed).
PRF average_prf(const std::vector<PRF>& runs);

struct SweepRow {
  std::size_t layer = 0;
  double mean_f1 = 0.0;
  std::vector<double> seed_f1;
};

/// Trains and evaluates one probe set per encoder layer 0..L_e on the dev split.
std::vector<SweepRow> layer_sweep(const std::vector<AnnotatedSentence>& train_corpus,
                                  const std::vector<AnnotatedSentence>& dev_corpus,
                                  const TraceSet& traces, ProbeTask task,
                                  const TrainConfig& config = {});

}  // namespace negmt
