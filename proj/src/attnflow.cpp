#include "negmt/attnflow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "negmt/errors.hpp"
#include "negmt/text.hpp"

namespace negmt {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init)
    : rows(init.size()), cols(init.size() ? init.begin()->size() : 0) {
  for (const auto& r : init) {
    if (r.size() != cols) throw ValidationError("Matrix: ragged initializer");
    values.insert(values.end(), r.begin(), r.end());
  }
}

std::string_view to_string(HeadMode mode) { return mode == HeadMode::kAverage ? "avg" : "max"; }

HeadMode parse_head_mode(std::string_view name) {
  const auto lower = text::ascii_lower(name);
  if (lower == "avg" || lower == "average" || lower == "mean") return HeadMode::kAverage;
  if (lower == "max") return HeadMode::kMax;
  throw UsageError("unknown head mode '" + std::string(name) + "' (expected avg or max)");
}

Matrix head_aggregate(std::span<const Matrix> heads, HeadMode mode) {
  if (heads.empty()) throw ValidationError("head_aggregate: no heads");
  Matrix out = heads.front();
  for (std::size_t h = 1; h < heads.size(); ++h) {
    const auto& m = heads[h];
    if (m.rows != out.rows || m.cols != out.cols) {
      throw ValidationError("head_aggregate: heads disagree in shape");
    }
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      if (mode == HeadMode::kAverage) {
        out.values[i] += m.values[i];
      } else {
        out.values[i] = std::max(out.values[i], m.values[i]);
      }
    }
  }
  if (mode == HeadMode::kAverage) {
    const double n = static_cast<double>(heads.size());
    for (auto& v : out.values) v /= n;
  }
  return out;
}

Matrix head_aggregate(const Tensor<4>& attention, std::size_t layer, HeadMode mode) {
  std::vector<Matrix> heads;
  const std::size_t q = attention.dim(2), k = attention.dim(3);
  for (std::size_t h = 0; h < attention.dim(1); ++h) {
    Matrix m(q, k);
    for (std::size_t i = 0; i < q; ++i) {
      const auto row = attention.row(layer, h, i);
      std::copy(row.begin(), row.end(), m.values.begin() + static_cast<std::ptrdiff_t>(i * k));
    }
    heads.push_back(std::move(m));
  }
  return head_aggregate(heads, mode);
}

Matrix add_residual(const Matrix& attention) {
  if (attention.rows != attention.cols) {
    throw ValidationError("add_residual: attention matrix is not square");
  }
  Matrix out = attention;
  for (auto& v : out.values) v *= 0.5;
  for (std::size_t i = 0; i < out.rows; ++i) out(i, i) += 0.5;
  return out;
}

FlowGraph::FlowGraph(std::size_t enc_layers, std::size_t dec_layers, std::size_t src_len,
                     std::size_t tgt_len)
    : enc_layers_(enc_layers), dec_layers_(dec_layers), src_len_(src_len), tgt_len_(tgt_len) {
  network_.node_count = encoder_node_count() + decoder_node_count();
}

std::size_t FlowGraph::encoder_node(std::size_t layer, std::size_t position) const {
  if (layer > enc_layers_ || position >= src_len_) {
    throw UsageError("encoder node (layer " + std::to_string(layer) + ", position " +
                     std::to_string(position) + ") out of range");
  }
  return layer * src_len_ + position;
}

std::size_t FlowGraph::decoder_node(std::size_t layer, std::size_t position) const {
  if (layer < 1 || layer > dec_layers_ || position >= tgt_len_) {
    throw UsageError("decoder node (layer " + std::to_string(layer) + ", position " +
                     std::to_string(position) + ") out of range");
  }
  return encoder_node_count() + (layer - 1) * tgt_len_ + position;
}

FlowNode FlowGraph::node(std::size_t id) const {
  if (id < encoder_node_count()) return {Side::kEncoder, id / src_len_, id % src_len_};
  const std::size_t d = id - encoder_node_count();
  return {Side::kDecoder, d / tgt_len_ + 1, d % tgt_len_};
}

void FlowGraph::add_edge(std::size_t from, std::size_t to, double capacity) {
  if (capacity > 0.0) network_.add_edge(from, to, capacity);
}

namespace {

/// Rescales each row to sum to one. Exported float32 rows drift from one by
/// rounding, and max-aggregated rows exceed it.
Matrix stochastic_rows(Matrix m) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) sum += m(r, c);
    if (sum <= 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) /= sum;
  }
  return m;
}

Matrix layer_attention(const Tensor<4>& attention, std::size_t layer, HeadMode mode) {
  return stochastic_rows(head_aggregate(attention, layer, mode));
}

}  // namespace

FlowGraph build_flow_graph(const ModelTrace& trace, const FlowOptions& options) {
  const auto& d = trace.dims;
  FlowGraph g(d.enc_layers, d.dec_layers, d.src_len, d.tgt_len);

  for (std::size_t l = 1; l <= d.enc_layers; ++l) {
    const Matrix a = add_residual(layer_attention(trace.enc_self_attn, l - 1, options.heads));
    for (std::size_t i = 0; i < d.src_len; ++i) {
      for (std::size_t j = 0; j < d.src_len; ++j) {
        g.add_edge(g.encoder_node(l, i), g.encoder_node(l - 1, j), a(i, j));
      }
    }
  }

  for (std::size_t l = 1; l <= d.dec_layers; ++l) {
    const bool split = l >= 2 && options.decoder_mixing == DecoderMixing::kSplit;
    const double share = split ? 0.5 : 1.0;
    const Matrix cross = layer_attention(trace.cross_attn, l - 1, options.heads);
    for (std::size_t t = 0; t < d.tgt_len; ++t) {
      for (std::size_t s = 0; s < d.src_len; ++s) {
        g.add_edge(g.decoder_node(l, t), g.encoder_node(d.enc_layers, s), share * cross(t, s));
      }
    }
    if (l == 1) continue;
    const Matrix self = add_residual(layer_attention(trace.dec_self_attn, l - 1, options.heads));
    for (std::size_t t = 0; t < d.tgt_len; ++t) {
      for (std::size_t u = 0; u < d.tgt_len; ++u) {
        g.add_edge(g.decoder_node(l, t), g.decoder_node(l - 1, u), share * self(t, u));
      }
    }
  }
  g.set_unit_outflow(options.decoder_mixing == DecoderMixing::kSplit || d.dec_layers == 1);
  return g;
}

double cue_flow(const FlowGraph& graph, std::span<const std::size_t> cue_positions,
                std::size_t dec_layer) {
  if (cue_positions.empty()) throw UsageError("cue_flow: no cue positions");
  if (dec_layer < 1 || dec_layer > graph.dec_layers()) {
    throw UsageError("cue_flow: decoder layer " + std::to_string(dec_layer) + " outside [1, " +
                     std::to_string(graph.dec_layers()) + "]");
  }
  double best = 0.0;
  for (auto pos : cue_positions) {
    if (pos >= graph.src_len()) {
      throw UsageError("cue_flow: cue position " + std::to_string(pos) +
                       " outside source of length " + std::to_string(graph.src_len()));
    }
    const std::size_t sink = graph.encoder_node(0, pos);
    for (std::size_t t = 0; t < graph.tgt_len(); ++t) {
      best = std::max(best, max_flow(graph.network(), graph.decoder_node(dec_layer, t), sink).value);
    }
  }
  // Anything above one is summation rounding.
  return graph.unit_outflow() ? std::min(best, 1.0) : best;
}

double cue_flow(const ModelTrace& trace, std::size_t cue_position, std::size_t dec_layer,
                const FlowOptions& options) {
  const std::size_t pos[] = {cue_position};
  return cue_flow(build_flow_graph(trace, options), pos, dec_layer);
}

RawCueAttention raw_cue_attention(const ModelTrace& trace, std::size_t cue_position,
                                  std::size_t dec_layer, HeadMode mode) {
  const auto& d = trace.dims;
  if (cue_position >= d.src_len) {
    throw UsageError("raw_cue_attention: cue position " + std::to_string(cue_position) +
                     " outside source of length " + std::to_string(d.src_len));
  }
  if (dec_layer < 1 || dec_layer > d.dec_layers) {
    throw UsageError("raw_cue_attention: decoder layer " + std::to_string(dec_layer) +
                     " outside [1, " + std::to_string(d.dec_layers) + "]");
  }
  const Matrix cross = head_aggregate(trace.cross_attn, dec_layer - 1, mode);
  RawCueAttention out;
  for (std::size_t t = 0; t < d.tgt_len; ++t) {
    out.weights.push_back(cross(t, cue_position));
    out.max = std::max(out.max, out.weights.back());
  }
  return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ValidationError("spearman: length mismatch (" + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw ValidationError("spearman: need at least two observations");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("spearman: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

FlowReport flow_report(const TraceSet& traces, const std::vector<CueLabel>& cues,
                       const std::vector<std::size_t>& layers, const FlowOptions& options,
                       CueMeasure measure) {
  FlowReport report;
  // values[layer index][cue index]
  std::vector<std::vector<double>> values(layers.size(), std::vector<double>(cues.size()));

  std::unordered_map<std::string, std::vector<std::size_t>> by_pair;
  for (std::size_t c = 0; c < cues.size(); ++c) by_pair[cues[c].pair_id].push_back(c);

  std::vector<std::pair<const ModelTrace*, std::vector<std::size_t>>> work;
  for (const auto& trace : traces.traces) {
    auto it = by_pair.find(trace.pair_id);
    if (it == by_pair.end()) continue;
    work.emplace_back(&trace, std::move(it->second));
    by_pair.erase(it);
  }
  if (!by_pair.empty()) {
    throw ValidationError("cue labels reference pair '" + by_pair.begin()->first +
                          "' which is not in the trace set");
  }

  auto process = [&](std::size_t w) {
    const ModelTrace& trace = *work[w].first;
    std::optional<FlowGraph> graph;
    if (measure == CueMeasure::kFlow) graph.emplace(build_flow_graph(trace, options));
    for (auto c : work[w].second) {
      for (std::size_t li = 0; li < layers.size(); ++li) {
        if (measure == CueMeasure::kFlow) {
          values[li][c] = cue_flow(*graph, cues[c].positions, layers[li]);
        } else {
          double best = 0.0;
          for (auto pos : cues[c].positions) {
            best = std::max(best, raw_cue_attention(trace, pos, layers[li], options.heads).max);
          }
          values[li][c] = best;
        }
      }
    }
  };

  // Each work item writes disjoint cells of `values`, so results do not
  // depend on the thread count.
  const std::size_t threads = std::min<std::size_t>(std::max<std::size_t>(options.jobs, 1), work.size());
  if (threads <= 1) {
    for (std::size_t w = 0; w < work.size(); ++w) process(w);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t w; (w = next.fetch_add(1)) < work.size();) process(w);
        } catch (...) {
          errors[t] = std::current_exception();
          next = work.size();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<double> category(cues.size());
  std::size_t n_correct = 0;
  for (std::size_t c = 0; c < cues.size(); ++c) {
    category[c] = cues[c].correct ? 1.0 : 0.0;
    if (cues[c].correct) ++n_correct;
  }
  const std::size_t n_under = cues.size() - n_correct;
  if (n_correct == 0) report.warnings.push_back("no correctly translated cues; group omitted");
  if (n_under == 0) report.warnings.push_back("no under-translated cues; group omitted");

  for (std::size_t li = 0; li < layers.size(); ++li) {
    std::optional<double> rho;
    if (n_correct > 0 && n_under > 0) {
      try {
        rho = std::abs(spearman(values[li], category));
      } catch (const ValidationError&) {
        report.warnings.push_back("layer " + std::to_string(layers[li]) +
                                  ": values are constant, |rho| undefined");
      }
    }
    for (bool group : {true, false}) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t c = 0; c < cues.size(); ++c) {
        if (cues[c].correct == group) {
          sum += values[li][c];
          ++n;
        }
      }
      if (n == 0) continue;
      report.rows.push_back({layers[li], group, n, sum / static_cast<double>(n), rho});
    }
  }
  return report;
}

}  // namespace negmt
