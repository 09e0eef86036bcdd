#pragma once

// Cosine similarity between negation cues and events, scope tokens and
// non-negation tokens, per layer.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "negmt/negdata.hpp"
#include "negmt/probe.hpp"
#include "negmt/tracestore.hpp"

namespace negmt {

/// dot(u, v) / (|u| |v|). Throws ValidationError on a zero vector or size mismatch.
double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

struct LayerRef {
  TraceSide side = TraceSide::kEncoder;
  std::size_t index = 0;

  /// "enc3", "dec6"
  std::string label() const;
  friend bool operator==(const LayerRef&, const LayerRef&) = default;
};

/// Parses a list such as "1..6,dec6" or "enc0,enc3". Bare numbers and ranges
/// take `default_side`.
std::vector<LayerRef> parse_layer_list(std::string_view spec, TraceSide default_side);

/// Running (sum, count) for one bucket; merging is associative and commutative.
struct SimBucket {
  double sum = 0.0;
  std::size_t count = 0;

  void add(double v) {
    sum += v;
    ++count;
  }
  void merge(const SimBucket& o) {
    sum += o.sum;
    count += o.count;
  }
  std::optional<double> mean() const {
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  }
};

struct SimTriple {
  LayerRef layer;
  std::optional<double> sim_ce;
  std::optional<double> sim_cs;
  std::optional<double> sim_co;
  std::size_t n_ce = 0;
  std::size_t n_cs = 0;
  std::size_t n_co = 0;
};

/// Buckets for one sentence given its pooled word vectors.
struct SimBuckets {
  SimBucket ce, cs, co;
  void merge(const SimBuckets& o) {
    ce.merge(o.ce);
    cs.merge(o.cs);
    co.merge(o.co);
  }
};
SimBuckets sentence_similarities(const AnnotatedSentence& sentence,
                                 const std::vector<Eigen::VectorXd>& word_vectors);

/// Micro-averaged cue/event, cue/scope and cue/outside similarities.
SimTriple sim_groups(const std::vector<AnnotatedSentence>& corpus, const TraceSet& traces,
                     LayerRef layer, std::vector<std::string>* warnings = nullptr);

std::vector<SimTriple> sim_sweep(const std::vector<AnnotatedSentence>& corpus,
                                 const TraceSet& traces, const std::vector<LayerRef>& layers,
                                 std::vector<std::string>* warnings = nullptr);

}  // namespace negmt
