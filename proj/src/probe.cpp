#include "negmt/probe.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "negmt/errors.hpp"
#include "negmt/text.hpp"

namespace negmt {

std::string_view to_string(ProbeTask task) {
  switch (task) {
    case ProbeTask::kCue:
      return "cue";
    case ProbeTask::kScope:
      return "scope";
    case ProbeTask::kEvent:
      return "event";
  }
  return "cue";
}

std::string_view to_string(TraceSide side) { return side == TraceSide::kEncoder ? "enc" : "dec"; }

ProbeTask parse_probe_task(std::string_view name) {
  if (name == "cue") return ProbeTask::kCue;
  if (name == "scope") return ProbeTask::kScope;
  if (name == "event") return ProbeTask::kEvent;
  throw UsageError("unknown probe task '" + std::string(name) + "' (expected cue, scope or event)");
}

TraceSide parse_trace_side(std::string_view name) {
  if (name == "enc" || name == "encoder") return TraceSide::kEncoder;
  if (name == "dec" || name == "decoder") return TraceSide::kDecoder;
  throw UsageError("unknown side '" + std::string(name) + "' (expected enc or dec)");
}

int class_count(ProbeTask task) { return task == ProbeTask::kCue ? 2 : 3; }
int selection_class(ProbeTask task) { return task == ProbeTask::kCue ? kCueClass : kSpanClass; }

Eigen::MatrixXd ProbeDataset::features() const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(examples.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = examples[i].vector[j];
    }
  }
  return x;
}

std::vector<int> ProbeDataset::labels() const {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

std::vector<int> word_labels(const AnnotatedSentence& sentence, ProbeTask task) {
  std::vector<int> labels(sentence.tokens.size(), kOthersClass);
  auto mark = [&](const std::vector<Span>& spans, int cls) {
    for (const auto& s : spans) {
      for (int i = s.first; i <= s.last; ++i) labels[static_cast<std::size_t>(i)] = cls;
    }
  };
  for (const auto& inst : sentence.instances) {
    if (task == ProbeTask::kScope) mark(inst.scope_spans, kSpanClass);
    if (task == ProbeTask::kEvent) mark(inst.event_spans, kSpanClass);
  }
  for (const auto& inst : sentence.instances) mark(inst.cue_spans, kCueClass);
  return labels;
}

Eigen::MatrixXd hidden_states(const ModelTrace& trace, TraceSide side, std::size_t layer) {
  const auto& d = trace.dims;
  const Tensor<3>* states = nullptr;
  std::size_t index = 0;
  if (side == TraceSide::kEncoder) {
    if (layer > d.enc_layers) {
      throw UsageError("encoder layer " + std::to_string(layer) + " outside [0, " +
                       std::to_string(d.enc_layers) + "]");
    }
    states = &trace.enc_hidden;
    index = layer;
  } else {
    if (layer < 1 || layer > d.dec_layers) {
      throw UsageError("decoder layer " + std::to_string(layer) + " outside [1, " +
                       std::to_string(d.dec_layers) + "]");
    }
    states = &trace.dec_hidden;
    index = layer - 1;
  }
  const std::size_t n = states->dim(1), dim = states->dim(2);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = states->row(index, i);
    for (std::size_t j = 0; j < dim; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return out;
}

namespace {

bool is_end_marker(const std::string& tok) {
  return tok == "</s>" || tok == "<eos>" || tok == "<EOS>";
}

SubwordAlignment alignment_for(const AnnotatedSentence& sentence, const ModelTrace& trace,
                               TraceSide side, std::string_view marker) {
  const auto& subs = side == TraceSide::kEncoder ? trace.src_tokens : trace.tgt_tokens;
  const std::size_t len = side == TraceSide::kEncoder ? trace.dims.src_len : trace.dims.tgt_len;
  if (subs.empty()) {
    if (sentence.tokens.size() > len) {
      throw ValidationError("pair '" + trace.pair_id +
                            "': trace has no tokens and fewer positions than words");
    }
    SubwordAlignment identity;
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      identity.word_to_subwords.push_back({static_cast<int>(i), static_cast<int>(i)});
    }
    return identity;
  }
  std::vector<std::string> trimmed = subs;
  while (!trimmed.empty() && is_end_marker(trimmed.back())) trimmed.pop_back();
  try {
    return align_subwords(sentence.tokens, trimmed, marker);
  } catch (const ValidationError& e) {
    throw ValidationError("pair '" + trace.pair_id + "': " + e.what());
  }
}

}  // namespace

TokenVectors pooled_vectors(const AnnotatedSentence& sentence, const ModelTrace& trace,
                            TraceSide side, std::size_t layer, Pooling pooling,
                            std::string_view marker) {
  const Eigen::MatrixXd h = hidden_states(trace, side, layer);
  const SubwordAlignment alignment = alignment_for(sentence, trace, side, marker);
  TokenVectors out;
  for (std::size_t w = 0; w < alignment.word_to_subwords.size(); ++w) {
    const Span span = alignment.word_to_subwords[w];
    if (pooling == Pooling::kWordMean) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(h.cols());
      for (int j = span.first; j <= span.last; ++j) sum += h.row(j).transpose();
      out.vectors.push_back(sum / static_cast<double>(span.size()));
      out.word_index.push_back(w);
    } else {
      for (int j = span.first; j <= span.last; ++j) {
        out.vectors.push_back(h.row(j).transpose());
        out.word_index.push_back(w);
      }
    }
  }
  return out;
}

ProbeDataset token_dataset(const std::vector<AnnotatedSentence>& corpus, const TraceSet& traces,
                           TraceSide side, std::size_t layer, ProbeTask task, Pooling pooling,
                           std::string_view marker) {
  ProbeDataset data;
  data.dim = traces.shared_dims().hidden_dim;
  for (const auto& sentence : corpus) {
    const ModelTrace* trace = traces.find(sentence.sentence_id);
    if (!trace) {
      data.warnings.push_back("no trace for sentence '" + sentence.sentence_id + "'; skipped");
      continue;
    }
    if (trace->dims.hidden_dim != data.dim) {
      throw ValidationError("pair '" + trace->pair_id + "': hidden_dim mismatch");
    }
    const auto labels = word_labels(sentence, task);
    const auto pooled = pooled_vectors(sentence, *trace, side, layer, pooling, marker);
    for (std::size_t i = 0; i < pooled.vectors.size(); ++i) {
      const auto& v = pooled.vectors[i];
      data.examples.push_back({std::vector<double>(v.data(), v.data() + v.size()),
                               labels[pooled.word_index[i]]});
    }
  }
  return data;
}

ProbeModel ProbeModel::zeros(std::size_t input_dim, std::size_t hidden, std::size_t classes) {
  ProbeModel m;
  const auto d = static_cast<Eigen::Index>(input_dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto c = static_cast<Eigen::Index>(classes);
  m.w1 = Eigen::MatrixXd::Zero(h, d);
  m.b1 = Eigen::VectorXd::Zero(h);
  m.w2 = Eigen::MatrixXd::Zero(c, h);
  m.b2 = Eigen::VectorXd::Zero(c);
  return m;
}

ProbeModel ProbeModel::random(std::size_t input_dim, std::size_t hidden, std::size_t classes,
                              std::uint64_t seed) {
  ProbeModel m = zeros(input_dim, hidden, classes);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](auto& block, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = u(rng);
  };
  fill(m.w1, input_dim);
  fill(m.b1, input_dim);
  fill(m.w2, hidden);
  fill(m.b2, hidden);
  m.metadata.seed = seed;
  return m;
}

namespace {

void softmax_rows(Eigen::MatrixXd& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - mx).exp();
    z.row(i) /= z.row(i).sum();
  }
}

void check_input(const ProbeModel& model, Eigen::Index cols) {
  if (cols != model.w1.cols()) {
    throw ValidationError("probe input has dimension " + std::to_string(cols) +
                          ", model expects " + std::to_string(model.w1.cols()));
  }
}

}  // namespace

Eigen::MatrixXd mlp_forward_batch(const ProbeModel& model, const Eigen::MatrixXd& x) {
  check_input(model, x.cols());
  Eigen::MatrixXd a1 = ((x * model.w1.transpose()).rowwise() + model.b1.transpose()).cwiseMax(0.0);
  Eigen::MatrixXd z = (a1 * model.w2.transpose()).rowwise() + model.b2.transpose();
  softmax_rows(z);
  return z;
}

Eigen::VectorXd mlp_forward(const ProbeModel& model, const Eigen::VectorXd& x) {
  check_input(model, x.size());
  return mlp_forward_batch(model, x.transpose()).row(0).transpose();
}

std::vector<int> predict(const ProbeModel& model, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd p = mlp_forward_batch(model, x);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    p.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double cross_entropy(const ProbeModel& model, const Eigen::MatrixXd& x,
                     const std::vector<int>& labels, ProbeGradients* grads) {
  check_input(model, x.cols());
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw ValidationError("cross_entropy: label count differs from batch size");
  }
  if (labels.empty()) throw ValidationError("cross_entropy: empty batch");
  const double n = static_cast<double>(labels.size());
  const Eigen::MatrixXd z1 = (x * model.w1.transpose()).rowwise() + model.b1.transpose();
  const Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
  Eigen::MatrixXd z2 = (a1 * model.w2.transpose()).rowwise() + model.b2.transpose();

  double loss = 0.0;
  for (Eigen::Index i = 0; i < z2.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= z2.cols()) throw ValidationError("cross_entropy: label out of range");
    const double mx = z2.row(i).maxCoeff();
    const double lse = mx + std::log((z2.row(i).array() - mx).exp().sum());
    loss += lse - z2(i, y);
  }
  loss /= n;
  if (!grads) return loss;

  softmax_rows(z2);
  Eigen::MatrixXd dz2 = z2;
  for (Eigen::Index i = 0; i < dz2.rows(); ++i) dz2(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  dz2 /= n;
  grads->w2 = dz2.transpose() * a1;
  grads->b2 = dz2.colwise().sum().transpose();
  Eigen::MatrixXd dz1 = dz2 * model.w2;
  dz1.array() *= (z1.array() > 0.0).cast<double>();
  grads->w1 = dz1.transpose() * x;
  grads->b1 = dz1.colwise().sum().transpose();
  return loss;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

PRF evaluate(const std::vector<int>& predictions, const std::vector<int>& gold,
             int positive_class) {
  if (predictions.size() != gold.size()) {
    throw ValidationError("evaluate: " + std::to_string(predictions.size()) +
                          " predictions for " + std::to_string(gold.size()) + " gold labels");
  }
  PRF r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predictions[i] == positive_class;
    const bool g = gold[i] == positive_class;
    if (p && g) ++r.tp;
    if (p && !g) ++r.fp;
    if (!p && g) ++r.fn;
  }
  r.precision = r.tp + r.fp ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

std::vector<PRF> evaluate(const std::vector<int>& predictions, const std::vector<int>& gold,
                          const std::vector<int>& positive_classes) {
  if (predictions.size() != gold.size()) throw ValidationError("evaluate: length mismatch");
  std::vector<PRF> out;
  for (int c : positive_classes) out.push_back(evaluate(predictions, gold, c));
  return out;
}

PRF average_prf(const std::vector<PRF>& runs) {
  PRF avg;
  if (runs.empty()) return avg;
  for (const auto& r : runs) {
    avg.precision += r.precision;
    avg.recall += r.recall;
    avg.f1 += r.f1;
    avg.tp += r.tp;
    avg.fp += r.fp;
    avg.fn += r.fn;
  }
  const double n = static_cast<double>(runs.size());
  avg.precision /= n;
  avg.recall /= n;
  avg.f1 /= n;
  return avg;
}

namespace {

struct AdamState {
  ProbeGradients m, v;
  std::size_t step = 0;

  explicit AdamState(const ProbeModel& model) {
    m = {Eigen::MatrixXd::Zero(model.w1.rows(), model.w1.cols()),
         Eigen::VectorXd::Zero(model.b1.size()),
         Eigen::MatrixXd::Zero(model.w2.rows(), model.w2.cols()),
         Eigen::VectorXd::Zero(model.b2.size())};
    v = m;
  }
};

template <typename P>
void adam_update(P& param, P& m, P& v, const P& g, const TrainConfig& c, double bc1, double bc2) {
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
  param.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
}

void adam_step(ProbeModel& model, AdamState& s, const ProbeGradients& g, const TrainConfig& c) {
  ++s.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  adam_update(model.w1, s.m.w1, s.v.w1, g.w1, c, bc1, bc2);
  adam_update(model.b1, s.m.b1, s.v.b1, g.b1, c, bc1, bc2);
  adam_update(model.w2, s.m.w2, s.v.w2, g.w2, c, bc1, bc2);
  adam_update(model.b2, s.m.b2, s.v.b2, g.b2, c, bc1, bc2);
}

}  // namespace

std::vector<ProbeModel> train_probe(const ProbeDataset& train, const ProbeDataset& dev,
                                    ProbeTask task, const TrainConfig& config) {
  if (train.examples.empty()) throw ValidationError("train_probe: empty training split");
  if (dev.examples.empty()) throw ValidationError("train_probe: empty development split");
  if (train.dim != dev.dim) {
    throw ValidationError("train_probe: train and dev vectors differ in dimension");
  }
  if (config.seeds == 0) throw UsageError("train_probe: at least one seed is required");
  const Eigen::MatrixXd x_train = train.features();
  const Eigen::MatrixXd x_dev = dev.features();
  const auto y_train = train.labels();
  const auto y_dev = dev.labels();
  const int classes = class_count(task);
  for (int y : y_train) {
    if (y < 0 || y >= classes) throw ValidationError("train_probe: label outside the task's classes");
  }
  const int target = selection_class(task);

  std::vector<ProbeModel> out;
  for (std::size_t s = 0; s < config.seeds; ++s) {
    const std::uint64_t seed = config.base_seed + s;
    ProbeModel model =
        ProbeModel::random(train.dim, config.hidden, static_cast<std::size_t>(classes), seed);
    AdamState adam(model);
    ProbeModel best = model;
    double best_f1 = evaluate(predict(model, x_dev), y_dev, target).f1;
    std::size_t best_epoch = 0;
    ProbeGradients grads;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      cross_entropy(model, x_train, y_train, &grads);
      adam_step(model, adam, grads, config);
      const double f1 = evaluate(predict(model, x_dev), y_dev, target).f1;
      if (f1 > best_f1) {
        best_f1 = f1;
        best_epoch = epoch;
        best = model;
      }
    }
    best.metadata.task = task;
    best.metadata.seed = seed;
    best.metadata.epochs = config.epochs;
    best.metadata.seeds = config.seeds;
    best.metadata.best_dev_f1 = best_f1;
    best.metadata.epoch_selected = best_epoch;
    out.push_back(std::move(best));
  }
  return out;
}

std::vector<SweepRow> layer_sweep(const std::vector<AnnotatedSentence>& train_corpus,
                                  const std::vector<AnnotatedSentence>& dev_corpus,
                                  const TraceSet& traces, ProbeTask task,
                                  const TrainConfig& config) {
  if (traces.traces.empty()) throw ValidationError("layer_sweep: empty trace set");
  std::vector<SweepRow> rows;
  const std::size_t layers = traces.shared_dims().enc_layers;
  for (std::size_t layer = 0; layer <= layers; ++layer) {
    const auto train = token_dataset(train_corpus, traces, TraceSide::kEncoder, layer, task);
    const auto dev = token_dataset(dev_corpus, traces, TraceSide::kEncoder, layer, task);
    SweepRow row;
    row.layer = layer;
    for (const auto& model : train_probe(train, dev, task, config)) {
      row.seed_f1.push_back(model.metadata.best_dev_f1);
    }
    double sum = 0.0;
    for (double f : row.seed_f1) sum += f;
    row.mean_f1 = sum / static_cast<double>(row.seed_f1.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace negmt
