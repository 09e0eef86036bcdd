// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails. The NegPar integration check runs only when
// NEGMT_NEGPAR_DIR points at a corpus (see README).

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "negmt/attnflow.hpp"
#include "negmt/contrastive.hpp"
#include "negmt/cuescan.hpp"
#include "negmt/errors.hpp"
#include "negmt/maxflow.hpp"
#include "negmt/negdata.hpp"
#include "negmt/probe.hpp"
#include "negmt/reprsim.hpp"
#include "negmt/text.hpp"
#include "negmt/tracestore.hpp"
#include "oracles.hpp"

using namespace negmt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum Status { kPass, kFail, kSkip } status = kPass;
  std::string detail;
};

/// Collects failure messages; the first few are kept for the report line.
struct Checker {
  std::size_t failures = 0;
  std::vector<std::string> messages;
  void check(bool ok, const std::string& what) {
    if (ok) return;
    ++failures;
    if (messages.size() < 3) messages.push_back(what);
  }
  Outcome outcome(const std::string& pass_detail) const {
    if (!failures) return {Outcome::kPass, pass_detail};
    return {Outcome::kFail, std::to_string(failures) + " failed check(s): " + text::join(messages, "; ")};
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string data(const std::string& name) { return std::string(NEGMT_TEST_DATA) + "/" + name; }

// ------------------------------------------------------------------- 1

Outcome manual_aggregation() {
  struct Row {
    std::array<std::size_t, kCategoryCount> counts;
    std::string expected;
  };
  const std::vector<Row> rows = {{{258, 8, 2, 3, 7}, "95.7"},
                                 {{232, 5, 2, 11, 0}, "94.8"},
                                 {{393, 15, 3, 10, 16}, "93.4"},
                                 {{451, 65, 3, 21, 23}, "91.7"}};
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  std::vector<std::string> got;
  for (const auto& row : rows) {
    std::vector<ManualEvalLabel> labels;
    for (std::size_t k = 0; k < kCategoryCount; ++k) {
      for (std::size_t i = 0; i < row.counts[k]; ++i) {
        labels.push_back({"p" + std::to_string(labels.size()), static_cast<Category>(k)});
      }
    }
    const auto s = aggregate_manual(labels);
    const auto pct = fixed(100.0 * s.accuracy, 1);
    got.push_back(pct);
    c.check(pct == row.expected, "expected " + row.expected + ", got " + pct);
    double sum = 0.0;
    for (double p : s.percentages) sum += std::round(p * 10.0) / 10.0;
    c.check(std::abs(sum - 100.0) <= 0.2 + 1e-9, "rounded percentages sum to " + fixed(sum, 1));
  }
  const double secs = seconds_since(t0);
  c.check(secs < 1.0, "took " + fixed(secs, 3) + " s");
  return c.outcome("accuracies " + text::join(got, " / ") + " % in " + fixed(secs, 4) + " s");
}

// ------------------------------------------------------------------- 2

Outcome prf_arithmetic() {
  const double f1 = f1_score(0.915, 0.665);
  Checker c;
  c.check(std::abs(f1 - 0.770) <= 5e-4, "F1 " + fixed(f1, 6));
  // Same figure through token counts: 1830 tp, 170 fp, 922 fn give P 0.915, R 0.665.
  std::vector<int> pred, gold;
  auto push = [&](int p, int g, int n) {
    for (int i = 0; i < n; ++i) {
      pred.push_back(p);
      gold.push_back(g);
    }
  };
  push(1, 1, 1830);
  push(1, 0, 170);
  push(0, 1, 922);
  push(0, 0, 5000);
  const auto r = evaluate(pred, gold, 1);
  c.check(std::abs(r.precision - 0.915) < 1e-12, "precision " + fixed(r.precision, 6));
  c.check(std::abs(r.recall - 0.665) < 5e-4, "recall " + fixed(r.recall, 6));
  c.check(std::abs(r.f1 - 0.770) <= 5e-4, "count-based F1 " + fixed(r.f1, 6));
  return c.outcome("F1(0.915, 0.665) = " + fixed(f1, 5));
}

// ------------------------------------------------------------------- 3

Outcome mismatch_arithmetic() {
  Checker c;
  // Published cells: 2.60M both, 0.15M EN only, 4.16M ZH only, 17.84M neither.
  const auto table = MismatchTable::from_counts(2600000, 150000, 4160000, 17840000);
  const double pct = 100.0 * table.mismatch_rate();
  c.check(std::abs(pct - 17.4) <= 0.05, "published cells give " + fixed(pct, 4) + " %");

  std::ifstream src(data("scan8.en")), tgt(data("scan8.zh"));
  const auto fixture = scan_parallel(src, tgt, ScanConfig{});
  c.check(fixture.total() == 8, "fixture has " + std::to_string(fixture.total()) + " pairs");
  c.check(fixture.mismatch_rate() == 0.5, "fixture mismatch " + fixed(fixture.mismatch_rate(), 6));
  for (std::size_t q = 0; q < 4; ++q) c.check(fixture.counts[q] == 2, "fixture quadrant count");
  return c.outcome("published cells " + fixed(pct, 2) + " %, fixture " +
                   fixed(100.0 * fixture.mismatch_rate(), 1) + " %");
}

// ------------------------------------------------------------------- 4

Outcome maxflow_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(4);
  Checker c;
  for (int g = 0; g < 1000; ++g) {
    const auto lg = oracle::random_layered_graph(rng, 12);
    const auto& net = lg.net;
    const auto r = max_flow(net, lg.source, lg.sink);
    const double cut = oracle::min_cut_enumeration(net, lg.source, lg.sink);
    c.check(std::abs(r.value - cut) <= 1e-9,
            "graph " + std::to_string(g) + ": flow " + fixed(r.value, 12) + " vs cut " + fixed(cut, 12));
    std::vector<double> balance(net.node_count, 0.0);
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
      const double f = r.edge_flow[e];
      c.check(f >= -1e-12 && f <= net.edges[e].capacity + 1e-12,
              "graph " + std::to_string(g) + ": capacity violated on edge " + std::to_string(e));
      balance[net.edges[e].from] -= f;
      balance[net.edges[e].to] += f;
    }
    for (std::size_t v = 0; v < net.node_count; ++v) {
      if (v == lg.source || v == lg.sink) continue;
      c.check(std::abs(balance[v]) <= 1e-9,
              "graph " + std::to_string(g) + ": conservation violated at node " + std::to_string(v));
    }
    c.check(std::abs(balance[lg.sink] - r.value) <= 1e-9, "sink inflow differs from flow value");
  }
  const double secs = seconds_since(t0);
  c.check(secs < 30.0, "took " + fixed(secs, 2) + " s");
  return c.outcome("1000 graphs agree with min-cut enumeration in " + fixed(secs, 2) + " s");
}

// ------------------------------------------------------------------- 5

void zero_cue_column(ModelTrace& t, std::size_t cue) {
  auto strip = [cue](Tensor<4>& a) {
    for (std::size_t l = 0; l < a.dim(0); ++l)
      for (std::size_t h = 0; h < a.dim(1); ++h)
        for (std::size_t q = 0; q < a.dim(2); ++q) {
          auto row = a.row(l, h, q);
          row[cue] = 0.0f;
          double sum = 0.0;
          for (float v : row) sum += v;
          for (auto& v : row) v = static_cast<float>(v / sum);
        }
  };
  strip(t.enc_self_attn);
  strip(t.cross_attn);
}

Outcome attention_flow_sanity() {
  Checker c;
  std::size_t one_hot = 0, zeroed = 0, stochastic = 0;
  const std::vector<TraceDims> shapes = {{1, 1, 1, 2, 1, 2}, {2, 3, 2, 4, 3, 2}, {3, 2, 4, 5, 4, 2},
                                         {6, 6, 2, 3, 2, 2}};
  for (const auto& d : shapes) {
    for (std::size_t cue = 0; cue < d.src_len; ++cue) {
      const auto t = oracle::one_hot_trace(d, cue);
      for (auto mixing : {DecoderMixing::kSplit, DecoderMixing::kUnscaled}) {
        FlowOptions opts;
        opts.decoder_mixing = mixing;
        const auto g = build_flow_graph(t, opts);
        for (std::size_t l = 1; l <= d.dec_layers; ++l) {
          const std::size_t pos[] = {cue};
          const double f = cue_flow(g, pos, l);
          c.check(f == 1.0, "one-hot flow " + fixed(f, 17));
          ++one_hot;
        }
      }
      auto z = synth_trace(cue + 31 * d.src_len, d);
      zero_cue_column(z, cue);
      const auto g = build_flow_graph(z);
      for (std::size_t l = 1; l <= d.dec_layers; ++l) {
        const std::size_t pos[] = {cue};
        const double f = cue_flow(g, pos, l);
        c.check(f == 0.0, "zeroed-column flow " + fixed(f, 17));
        ++zeroed;
      }
    }
  }
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TraceDims d{1 + seed % 4, 1 + seed % 3, 1 + seed % 2, 2 + seed % 5, 1 + seed % 4, 2};
    const auto t = synth_trace(seed, d);
    for (auto heads : {HeadMode::kAverage, HeadMode::kMax}) {
      FlowOptions opts;
      opts.heads = heads;
      const auto g = build_flow_graph(t, opts);
      for (std::size_t l = 1; l <= d.dec_layers; ++l) {
        for (std::size_t cue = 0; cue < d.src_len; ++cue) {
          const std::size_t pos[] = {cue};
          const double f = cue_flow(g, pos, l);
          c.check(f >= 0.0 && f <= 1.0, "stochastic flow " + fixed(f, 17) + " outside [0,1]");
          ++stochastic;
        }
      }
    }
  }
  return c.outcome(std::to_string(one_hot) + " one-hot flows = 1, " + std::to_string(zeroed) +
                   " zeroed = 0, " + std::to_string(stochastic) + " stochastic in [0,1]");
}

// ------------------------------------------------------------------- 6

Outcome spearman_checks() {
  Checker c;
  std::mt19937_64 rng(6);
  for (int n = 2; n <= 40; ++n) {
    std::vector<double> x(n), up(n), down(n);
    for (int i = 0; i < n; ++i) {
      x[i] = i + std::uniform_real_distribution<double>(0.0, 0.5)(rng);
      up[i] = std::exp(0.1 * i);
      down[i] = -3.0 * i * i;
    }
    std::shuffle(x.begin(), x.end(), rng);
    std::vector<double> ux(n), dx(n);
    for (int i = 0; i < n; ++i) {
      ux[i] = std::pow(x[i], 3);
      dx[i] = -x[i];
    }
    c.check(spearman(up, std::vector<double>(up.rbegin(), up.rend())) == -1.0, "reversed");
    c.check(spearman(x, ux) == 1.0, "monotone gave " + fixed(spearman(x, ux), 17));
    c.check(spearman(x, dx) == -1.0, "antitone gave " + fixed(spearman(x, dx), 17));
    c.check(spearman(up, down) == -1.0, "antitone sequences");
  }
  std::size_t compared = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = std::uniform_int_distribution<int>(3, 30)(rng);
    const int levels = std::uniform_int_distribution<int>(2, 6)(rng);
    std::uniform_int_distribution<int> pick(0, levels - 1);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = pick(rng);
      y[i] = pick(rng);
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) x[0] = levels;
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) y[0] = levels;
    const auto ranks = average_ranks(x);
    const auto expect_ranks = oracle::average_ranks(x);
    for (int i = 0; i < n; ++i) c.check(std::abs(ranks[i] - expect_ranks[i]) <= 1e-12, "rank");
    const double got = spearman(x, y), want = oracle::spearman(x, y);
    c.check(std::abs(got - want) <= 1e-12,
            "trial " + std::to_string(trial) + ": " + fixed(got, 15) + " vs " + fixed(want, 15));
    ++compared;
  }
  return c.outcome("exact +-1 on monotone/antitone, " + std::to_string(compared) +
                   " tied vectors within 1e-12");
}

// ------------------------------------------------------------------- 7

template <typename Param>
double worst_gradient_error(ProbeModel& m, Param& p, const Param& analytic, const Eigen::MatrixXd& x,
                            const std::vector<int>& y) {
  double worst = 0.0;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double saved = p.data()[i];
    p.data()[i] = saved + h;
    const double up = cross_entropy(m, x, y);
    p.data()[i] = saved - h;
    const double down = cross_entropy(m, x, y);
    p.data()[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double a = analytic.data()[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3}));
  }
  return worst;
}

ProbeDataset separable(double offset) {
  ProbeDataset d;
  d.dim = 2;
  for (int i = 0; i < 10; ++i) {
    const bool pos = i % 2 == 0;
    const double t = 0.1 * i + offset;
    d.examples.push_back({{pos ? 2.0 + t : -2.0 - t, 0.5 - t}, pos ? kCueClass : kOthersClass});
  }
  return d;
}

Outcome probe_numerics() {
  Checker c;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(1, 6), hid(1, 6), cls(2, 3), batch(1, 8);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = dim(rng), h = hid(rng), k = cls(rng), n = batch(rng);
    auto m = ProbeModel::random(d, h, k, 500 + trial);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) y.push_back(std::uniform_int_distribution<int>(0, k - 1)(rng));
    ProbeGradients g;
    cross_entropy(m, x, y, &g);
    for (double e : {worst_gradient_error(m, m.w1, g.w1, x, y), worst_gradient_error(m, m.b1, g.b1, x, y),
                     worst_gradient_error(m, m.w2, g.w2, x, y), worst_gradient_error(m, m.b2, g.b2, x, y)}) {
      worst = std::max(worst, e);
      c.check(e < 1e-4, "trial " + std::to_string(trial) + " relative error " + fixed(e, 8));
    }
  }

  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.seeds = 3;
  cfg.hidden = 16;
  cfg.learning_rate = 0.05;
  const auto models = train_probe(separable(0.0), separable(0.05), ProbeTask::kCue, cfg);
  std::size_t latest = 0;
  for (const auto& m : models) {
    c.check(m.metadata.best_dev_f1 == 1.0, "separable dev F1 " + fixed(m.metadata.best_dev_f1, 4));
    latest = std::max(latest, m.metadata.epoch_selected);
  }
  const auto again = train_probe(separable(0.0), separable(0.05), ProbeTask::kCue, cfg);
  for (std::size_t i = 0; i < models.size(); ++i) {
    c.check(models[i].w1 == again[i].w1 && models[i].b1 == again[i].b1 &&
                models[i].w2 == again[i].w2 && models[i].b2 == again[i].b2,
            "seed " + std::to_string(i) + " not reproducible");
  }
  return c.outcome("worst gradient error " + fixed(worst, 10) + ", dev F1 1.0 by epoch " +
                   std::to_string(latest) + ", seeds reproducible");
}

// ------------------------------------------------------------------- 8

Outcome contrastive_rules() {
  Checker c;
  Vocabulary vocab;
  {
    std::ifstream in(data("german_vocab.txt"));
    for (std::string w; std::getline(in, w);) {
      if (!w.empty()) vocab.insert(w);
    }
  }
  std::ifstream in(data("german_polarity.tsv"));
  std::size_t cases = 0, round_trips = 0;
  std::vector<bool> rule_seen(6, false);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto cols = text::split(line, '\t');
    const Rule rule = parse_rule(cols[0]);
    const auto ref = text::split_whitespace(cols[1]);
    const auto expected = text::split_whitespace(cols[2]);
    rule_seen[static_cast<std::size_t>(rule)] = true;
    ++cases;
    std::vector<Variant> mine;
    const auto variants = gen_german_variants(ref, vocab);
    for (const auto& v : variants) {
      if (v.rule == rule) mine.push_back(v);
    }
    c.check(mine.size() == 1 && mine[0].tokens == expected,
            std::string(to_string(rule)) + " on '" + cols[1] + "'");
    if (mine.size() == 1) {
      const auto& v = mine[0];
      const long diff = static_cast<long>(v.tokens.size()) - static_cast<long>(ref.size());
      const bool single_site =
          (v.edit == EditKind::kSubstitute && diff == 0) || (v.edit == EditKind::kDelete && diff == -1) ||
          (v.edit == EditKind::kInsert && diff == 1);
      c.check(single_site, "edit kind does not match length change");
    }
    for (const auto& v : variants) {
      if (v.direction != Direction::kDeletion) continue;
      // Put the removed cue back at the same position.
      std::vector<std::string> back = v.tokens;
      if (v.edit == EditKind::kDelete) {
        back.insert(back.begin() + static_cast<std::ptrdiff_t>(v.position), v.edited_token);
      } else {
        back[v.position] = v.edited_token;
      }
      c.check(back == ref && revert_variant(v) == ref, "round trip failed on '" + cols[1] + "'");
      ++round_trips;
    }
  }
  c.check(cases == 20, "fixture has " + std::to_string(cases) + " sentences");
  c.check(std::all_of(rule_seen.begin(), rule_seen.end(), [](bool b) { return b; }),
          "not every German rule is covered");

  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> count(1, 5), coarse(-8, 0);
  std::uniform_real_distribution<double> fine(-20.0, 0.0);
  std::bernoulli_distribution use_coarse(0.5);
  for (int i = 0; i < 1000; ++i) {
    ScoreRecord r;
    r.instance_id = "r" + std::to_string(i);
    auto draw = [&] { return use_coarse(rng) ? static_cast<double>(coarse(rng)) : fine(rng); };
    r.reference_logprob = draw();
    const int n = count(rng);
    for (int k = 0; k < n; ++k) r.variant_logprobs.push_back(draw());
    bool expected = true;
    for (double v : r.variant_logprobs) {
      if (!(r.reference_logprob > v)) expected = false;
    }
    c.check(score_instance(r) == expected, "score_instance disagrees on record " + std::to_string(i));
  }
  return c.outcome(std::to_string(cases) + " fixture edits, " + std::to_string(round_trips) +
                   " deletion round trips, 1000 scored records agree");
}

// ------------------------------------------------------------------- 9

Outcome representation_similarity() {
  Checker c;
  // "a not b c d": cue 1, event 2, scope {2, 3}; words 0 and 4 lie outside.
  std::vector<AnnotatedSentence> corpus;
  TraceSet set;
  for (int s = 0; s < 3; ++s) {
    AnnotatedSentence sent;
    sent.sentence_id = "h" + std::to_string(s);
    sent.tokens = {"a", "not", "b", "c", "d"};
    NegInstance inst;
    inst.cue_spans = {{1, 1}};
    inst.event_spans = {{2, 2}};
    inst.scope_spans = {{2, 3}};
    sent.instances.push_back(inst);
    corpus.push_back(sent);
    auto t = ModelTrace::zeros(sent.sentence_id, {2, 1, 1, 5, 1, 5});
    for (std::size_t l = 0; l <= 2; ++l) {
      const float k = static_cast<float>(1 + s + l);
      for (std::size_t j = 0; j < 2; ++j) {
        t.enc_hidden(l, 1, j) = k * (j + 1.5f);
        t.enc_hidden(l, 2, j) = k * (j + 1.5f);
        t.enc_hidden(l, 3, j) = 1.0f;
      }
      t.enc_hidden(l, 0, 2) = k;
      t.enc_hidden(l, 4, 3) = 2.0f;
      t.enc_hidden(l, 4, 4) = -1.0f;
    }
    set.traces.push_back(std::move(t));
  }
  for (std::size_t l = 0; l <= 2; ++l) {
    const auto r = sim_groups(corpus, set, {TraceSide::kEncoder, l});
    c.check(r.sim_ce && *r.sim_ce == 1.0, "layer " + std::to_string(l) + " sim_ce not exactly 1");
    c.check(r.sim_co && *r.sim_co == 0.0, "layer " + std::to_string(l) + " sim_co not exactly 0");
  }

  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> log_scale(-4.0, 4.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int d = std::uniform_int_distribution<int>(1, 32)(rng);
    Eigen::VectorXd u(d), v(d);
    for (int k = 0; k < d; ++k) {
      u[k] = normal(rng);
      v[k] = normal(rng);
    }
    const double a = std::pow(10.0, log_scale(rng)), b = std::pow(10.0, log_scale(rng));
    const double e = std::abs(cosine(a * u, b * v) - cosine(u, v));
    worst = std::max(worst, e);
    c.check(e <= 1e-12, "rescaling changed cosine by " + fixed(e, 15));
  }
  return c.outcome("sim_ce = 1, sim_co = 0 on hand corpus; worst rescaling drift " + fixed(worst, 17));
}

// ------------------------------------------------------------------ 10

Outcome trace_container() {
  Checker c;
  std::mt19937_64 rng(10);
  std::vector<std::string> encodings;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TraceSet set;
    set.metadata.decoder_final_norm = seed % 2 == 1;
    const std::size_t n = 1 + seed % 3;
    for (std::size_t i = 0; i < n; ++i) {
      const TraceDims d{1 + seed % 3, 1 + seed % 2, 1 + seed % 2, 2 + (seed * 3 + i) % 5,
                        1 + (seed + 2 * i) % 4, 3};
      set.traces.push_back(synth_trace(seed * 100 + i, d, "t" + std::to_string(seed) + "_" + std::to_string(i)));
    }
    const auto bytes = encode_traces(set);
    const auto back = decode_traces(bytes);
    c.check(back == set, "seed " + std::to_string(seed) + ": decoded set differs");
    c.check(encode_traces(back) == bytes, "seed " + std::to_string(seed) + ": re-encoding differs");
    bool bitwise = back.traces.size() == set.traces.size();
    for (std::size_t i = 0; bitwise && i < set.traces.size(); ++i) {
      const auto& x = set.traces[i].cross_attn;
      const auto& y = back.traces[i].cross_attn;
      bitwise = x.size() == y.size() && std::memcmp(x.data().data(), y.data().data(), x.size() * sizeof(float)) == 0;
    }
    c.check(bitwise, "tensor bytes differ");
    encodings.push_back(bytes);
  }
  std::size_t clean = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& bytes = encodings[static_cast<std::size_t>(i) % encodings.size()];
    const std::size_t cut = std::uniform_int_distribution<std::size_t>(0, bytes.size() - 1)(rng);
    try {
      decode_traces(std::string_view(bytes).substr(0, cut));
      c.check(false, "truncation to " + std::to_string(cut) + " bytes was accepted");
    } catch (const FormatError&) {
      ++clean;
    } catch (const std::exception& e) {
      c.check(false, "truncation to " + std::to_string(cut) + " bytes: " + e.what());
    }
  }
  return c.outcome("10 seeds round-trip bitwise; " + std::to_string(clean) +
                   "/1000 truncations rejected with FormatError");
}

// ------------------------------------------------------------------ 11

/// The file under `dir` whose name contains `split`; empty when absent or ambiguous.
std::string find_split(const fs::path& dir, const std::string& split) {
  std::vector<std::string> hits;
  if (!fs::is_directory(dir)) return {};
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename().string().find(split) != std::string::npos) {
      hits.push_back(e.path().string());
    }
  }
  return hits.size() == 1 ? hits[0] : std::string{};
}

Outcome negpar_counts() {
  const char* root = std::getenv("NEGMT_NEGPAR_DIR");
  if (!root || !*root) {
    return {Outcome::kSkip,
            "NegPar corpus not available; set NEGMT_NEGPAR_DIR to a directory with en/ and zh/ "
            "subdirectories holding one train, dev and test file each"};
  }
  struct Expected {
    std::string lang, split;
    std::size_t cue, event, scope;
  };
  const std::vector<Expected> table = {
      {"en", "train", 984, 616, 887}, {"en", "dev", 173, 122, 168}, {"en", "test", 264, 173, 249},
      {"zh", "train", 1209, 756, 1160}, {"zh", "dev", 231, 163, 227}, {"zh", "test", 339, 250, 338}};
  Checker c;
  for (const auto& e : table) {
    const auto path = find_split(fs::path(root) / e.lang, e.split);
    if (path.empty()) {
      c.check(false, "no unique " + e.lang + " " + e.split + " file");
      continue;
    }
    const auto s = corpus_stats(parse_negpar_file(path));
    const auto tag = e.lang + " " + e.split;
    c.check(s.cue == e.cue, tag + " cue " + std::to_string(s.cue));
    c.check(s.event == e.event, tag + " event " + std::to_string(s.event));
    c.check(s.scope == e.scope, tag + " scope " + std::to_string(s.scope));
  }
  return c.outcome("all 18 component counts match");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"manual-evaluation aggregation", manual_aggregation},
      {"precision/recall/F1 arithmetic", prf_arithmetic},
      {"cue-mismatch arithmetic", mismatch_arithmetic},
      {"max-flow vs exhaustive min-cut", maxflow_oracle},
      {"attention-flow sanity", attention_flow_sanity},
      {"Spearman correlation", spearman_checks},
      {"probe numerics", probe_numerics},
      {"contrastive rules and scoring", contrastive_rules},
      {"representation similarity", representation_similarity},
      {"trace container round trip and fuzzing", trace_container},
      {"NegPar component counts", negpar_counts},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Outcome::kFail, std::string("exception: ") + e.what()};
    }
    const char* status = o.status == Outcome::kPass ? "PASS" : o.status == Outcome::kFail ? "FAIL" : "SKIP";
    if (o.status == Outcome::kFail) ++failed;
    std::cout << status << " criterion " << (i + 1) << " (" << criteria[i].first << "): " << o.detail
              << std::endl;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criterion(s) failed"
                       : std::string("acceptance: all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
