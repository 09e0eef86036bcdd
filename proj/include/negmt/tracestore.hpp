#pragma once

// Model-trace container: attention tensors, hidden states and target token
// log-probabilities exported from an NMT system, one record per sentence pair.
//
// On-disk layout (all integers little-endian):
//
//   offset 0   8 bytes   magic "NEGTRACE"
//   offset 8   u32       schema version (currently 1)
//   offset 12  u64       metadata length N
//   offset 20  N bytes   UTF-8 JSON metadata
//   then       raw IEEE-754 binary32 payload, little-endian
//
// The payload holds, for each trace in metadata order, the tensors listed in
// "tensor_order": enc_self_attn [Le][H][S][S], dec_self_attn [Ld][H][T][T],
// cross_attn [Ld][H][T][S], enc_hidden [Le+1][S][D], dec_hidden [Ld][T][D],
// tgt_token_logprobs [T]. Nothing may follow the last tensor.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "negmt/tensor.hpp"

namespace negmt {

inline constexpr std::string_view kTraceMagic = "NEGTRACE";
inline constexpr std::uint32_t kTraceSchemaVersion = 1;
inline constexpr double kAttentionRowTolerance = 1e-4;

struct TraceDims {
  std::size_t enc_layers = 0;
  std::size_t dec_layers = 0;
  std::size_t heads = 0;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::size_t hidden_dim = 0;

  friend bool operator==(const TraceDims&, const TraceDims&) = default;
};

/// Parses "Le,Ld,H,S,T,D".
TraceDims parse_dims(std::string_view spec);

struct ModelTrace {
  std::string pair_id;
  TraceDims dims;
  /// Subword tokens as the model saw them; empty means unknown.
  std::vector<std::string> src_tokens;
  std::vector<std::string> tgt_tokens;
  Tensor<4> enc_self_attn;
  Tensor<4> dec_self_attn;
  Tensor<4> cross_attn;
  /// Index 0 holds the source embeddings.
  Tensor<3> enc_hidden;
  Tensor<3> dec_hidden;
  Tensor<1> tgt_token_logprobs;

  /// Allocates zero tensors of the right shapes.
  static ModelTrace zeros(std::string pair_id, const TraceDims& dims);

  friend bool operator==(const ModelTrace&, const ModelTrace&) = default;
};

/// Exporter-side facts the consumer cannot infer from the tensors.
struct TraceMetadata {
  bool decoder_final_norm = false;
  bool embeddings_include_position = true;
  /// Where decoder nodes sit inside a layer, e.g. "post_ffn".
  std::string decoder_node = "post_ffn";

  friend bool operator==(const TraceMetadata&, const TraceMetadata&) = default;
};

struct TraceSet {
  TraceMetadata metadata;
  std::vector<ModelTrace> traces;

  const ModelTrace* find(std::string_view pair_id) const;
  /// Shared layer/head/hidden dims; src_len and tgt_len are zero.
  TraceDims shared_dims() const;

  friend bool operator==(const TraceSet&, const TraceSet&) = default;
};

/// Invariant violations for one trace, each naming tensor and location.
/// Empty when valid.
std::vector<std::string> check_trace(const ModelTrace& trace);

/// Throws ValidationError listing every failing trace, or when traces disagree
/// on layer, head or hidden dims.
void validate_trace_set(const TraceSet& set);

/// Serializes without validating.
std::string encode_traces(const TraceSet& set);
/// Parses and validates. FormatError on layout problems, ValidationError on
/// invariant violations.
TraceSet decode_traces(std::string_view bytes);

TraceSet read_trace(const std::string& path);
/// Validates, then writes the container.
void write_trace(const TraceSet& set, const std::string& path);

/// Deterministic pseudo-random trace that satisfies every invariant.
ModelTrace synth_trace(std::uint64_t seed, const TraceDims& dims,
                       std::string pair_id = "synth");

}  // namespace negmt
