#pragma once

// Attention-flow attribution from decoder states to source embeddings, raw
// cross-attention statistics and rank correlation with translation outcome.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "negmt/maxflow.hpp"
#include "negmt/tracestore.hpp"

namespace negmt {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> init);

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

enum class HeadMode { kAverage, kMax };

std::string_view to_string(HeadMode mode);
HeadMode parse_head_mode(std::string_view name);

/// Collapse heads: mean or entrywise maximum. Throws on zero heads or ragged shapes.
Matrix head_aggregate(std::span<const Matrix> heads, HeadMode mode);
/// Same, reading layer `layer` of an [L][H][Q][K] tensor.
Matrix head_aggregate(const Tensor<4>& attention, std::size_t layer, HeadMode mode);

/// 0.5 * A + 0.5 * I for a square A.
Matrix add_residual(const Matrix& attention);

enum class Side { kEncoder, kDecoder };

struct FlowNode {
  Side side = Side::kEncoder;
  /// Encoder layers run 0 (embeddings) .. L_e, decoder layers 1 .. L_d.
  std::size_t layer = 0;
  std::size_t position = 0;
};

/// How a decoder node (layer >= 2) splits its unit of mass between
/// cross-attention and the lower decoder layer.
enum class DecoderMixing {
  /// Half to cross-attention, half to the residual-mixed self-attention, so
  /// every decoder node's outgoing capacity sums to one.
  kSplit,
  /// Full cross-attention row plus full residual-mixed self-attention row.
  kUnscaled,
};

struct FlowOptions {
  HeadMode heads = HeadMode::kAverage;
  DecoderMixing decoder_mixing = DecoderMixing::kSplit;
  /// Worker threads used by flow_report.
  std::size_t jobs = 1;
};

/// Layered capacity graph over token positions. Edges point from higher to
/// lower layers; zero-capacity edges are omitted.
class FlowGraph {
 public:
  FlowGraph(std::size_t enc_layers, std::size_t dec_layers, std::size_t src_len,
            std::size_t tgt_len);

  std::size_t encoder_node(std::size_t layer, std::size_t position) const;
  std::size_t decoder_node(std::size_t layer, std::size_t position) const;
  FlowNode node(std::size_t id) const;

  std::size_t node_count() const { return network_.node_count; }
  std::size_t encoder_node_count() const { return (enc_layers_ + 1) * src_len_; }
  std::size_t decoder_node_count() const { return dec_layers_ * tgt_len_; }
  std::size_t enc_layers() const { return enc_layers_; }
  std::size_t dec_layers() const { return dec_layers_; }
  std::size_t src_len() const { return src_len_; }
  std::size_t tgt_len() const { return tgt_len_; }

  const FlowNetwork& network() const { return network_; }
  void add_edge(std::size_t from, std::size_t to, double capacity);
  /// True when every node's outgoing capacity sums to one, so no flow exceeds one.
  bool unit_outflow() const { return unit_outflow_; }
  void set_unit_outflow(bool v) { unit_outflow_ = v; }

 private:
  std::size_t enc_layers_, dec_layers_, src_len_, tgt_len_;
  FlowNetwork network_;
  bool unit_outflow_ = false;
};

FlowGraph build_flow_graph(const ModelTrace& trace, const FlowOptions& options = {});

/// Max over decoder positions at `dec_layer` and over `cue_positions` (the
/// subwords of one cue) of the max-flow into the cue's embedding node.
double cue_flow(const FlowGraph& graph, std::span<const std::size_t> cue_positions,
                std::size_t dec_layer);
double cue_flow(const ModelTrace& trace, std::size_t cue_position, std::size_t dec_layer,
                const FlowOptions& options = {});

struct RawCueAttention {
  /// Head-aggregated cross-attention on the cue, one entry per decoder position.
  std::vector<double> weights;
  double max = 0.0;
};

RawCueAttention raw_cue_attention(const ModelTrace& trace, std::size_t cue_position,
                                  std::size_t dec_layer, HeadMode mode = HeadMode::kAverage);

/// Ranks with ties replaced by the mean of their 1-based positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks. Throws ValidationError on length
/// mismatch, fewer than two values, or a constant input.
double spearman(std::span<const double> x, std::span<const double> y);

struct CueLabel {
  std::string pair_id;
  /// Source subword positions of one cue.
  std::vector<std::size_t> positions;
  /// true: translated correctly; false: under-translated.
  bool correct = true;
};

struct FlowReportRow {
  std::size_t layer = 0;
  bool correct_group = true;
  std::size_t n = 0;
  double mean = 0.0;
  /// |rho| between the per-cue values and the binary category; absent when
  /// only one group is populated.
  std::optional<double> abs_rho;
};

struct FlowReport {
  std::vector<FlowReportRow> rows;
  std::vector<std::string> warnings;
};

enum class CueMeasure { kFlow, kRawAttention };

/// Per layer and category group: mean cue value and |spearman(values, category)|.
FlowReport flow_report(const TraceSet& traces, const std::vector<CueLabel>& cues,
                       const std::vector<std::size_t>& layers, const FlowOptions& options = {},
                       CueMeasure measure = CueMeasure::kFlow);

}  // namespace negmt
