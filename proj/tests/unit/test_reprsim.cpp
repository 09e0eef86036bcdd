#include <gtest/gtest.h>

#include <random>

#include "negmt/errors.hpp"
#include "negmt/reprsim.hpp"
#include "oracles.hpp"

using namespace negmt;

namespace {

/// "a not b c d": cue at 1, event at 2, scope {2, 3}, word 0 and 4 outside.
AnnotatedSentence hand_sentence(const std::string& id) {
  AnnotatedSentence s;
  s.sentence_id = id;
  s.tokens = {"a", "not", "b", "c", "d"};
  NegInstance inst;
  inst.cue_spans = {{1, 1}};
  inst.event_spans = {{2, 2}};
  inst.scope_spans = {{2, 3}};
  s.instances.push_back(inst);
  return s;
}

/// Cue and event share one vector; outside words live on other axes.
ModelTrace hand_trace(const std::string& id, float scale) {
  auto t = ModelTrace::zeros(id, {2, 1, 1, 5, 1, 4});
  for (std::size_t l = 0; l <= 2; ++l) {
    t.enc_hidden(l, 1, 0) = 1.0f * scale;
    t.enc_hidden(l, 1, 1) = 3.0f * scale;
    t.enc_hidden(l, 2, 0) = 1.0f * scale;
    t.enc_hidden(l, 2, 1) = 3.0f * scale;
    t.enc_hidden(l, 3, 0) = 2.0f;
    t.enc_hidden(l, 3, 1) = 1.0f;
    t.enc_hidden(l, 0, 2) = 7.0f;
    t.enc_hidden(l, 4, 3) = 0.5f;
  }
  return t;
}

}  // namespace

TEST(Reprsim, CosineBasics) {
  Eigen::VectorXd u(3), v(3);
  u << 1, 2, 3;
  v << -2, 1, 0;
  EXPECT_EQ(cosine(u, u), 1.0);
  EXPECT_EQ(cosine(u, -u), -1.0);
  EXPECT_EQ(cosine(u, v), 0.0);
  EXPECT_THROW(cosine(u, Eigen::VectorXd::Zero(3)), ValidationError);
  EXPECT_THROW(cosine(u, Eigen::VectorXd::Ones(2)), ValidationError);
}

TEST(Reprsim, CosineScaleInvariance) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
  std::uniform_int_distribution<int> dim(1, 16);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = dim(rng);
    Eigen::VectorXd u(d), v(d);
    for (int i = 0; i < d; ++i) {
      u[i] = normal(rng);
      v[i] = normal(rng);
    }
    const double a = std::pow(10.0, log_scale(rng)), b = std::pow(10.0, log_scale(rng));
    EXPECT_NEAR(cosine(a * u, b * v), cosine(u, v), 1e-12) << "trial " << trial;
    EXPECT_NEAR(cosine(u, v), u.dot(v) / (u.norm() * v.norm()), 1e-12);
  }
}

TEST(Reprsim, LayerLists) {
  const auto l = parse_layer_list("1..3,dec6, enc0", TraceSide::kEncoder);
  ASSERT_EQ(l.size(), 5u);
  EXPECT_EQ(l[0], (LayerRef{TraceSide::kEncoder, 1}));
  EXPECT_EQ(l[2].label(), "enc3");
  EXPECT_EQ(l[3], (LayerRef{TraceSide::kDecoder, 6}));
  EXPECT_EQ(l[4].label(), "enc0");
  EXPECT_EQ(parse_layer_list("2", TraceSide::kDecoder)[0].label(), "dec2");
  EXPECT_THROW(parse_layer_list("3..1", TraceSide::kEncoder), UsageError);
  EXPECT_THROW(parse_layer_list("1,,2", TraceSide::kEncoder), UsageError);
  EXPECT_THROW(parse_layer_list("x1", TraceSide::kEncoder), UsageError);
  EXPECT_THROW(parse_layer_list("-1", TraceSide::kEncoder), UsageError);
}

TEST(Reprsim, SentenceBuckets) {
  const auto s = hand_sentence("h");
  std::vector<Eigen::VectorXd> vecs(5, Eigen::VectorXd::Zero(2));
  vecs[0] << 0, 1;
  vecs[1] << 1, 0;
  vecs[2] << 1, 0;
  vecs[3] << 1, 1;
  vecs[4] << 0, 2;
  const auto b = sentence_similarities(s, vecs);
  EXPECT_EQ(b.ce.count, 1u);
  EXPECT_EQ(b.cs.count, 1u);
  EXPECT_EQ(b.co.count, 2u);
  EXPECT_EQ(*b.ce.mean(), 1.0);
  EXPECT_NEAR(*b.cs.mean(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(*b.co.mean(), 0.0);
  vecs.pop_back();
  EXPECT_THROW(sentence_similarities(s, vecs), ValidationError);
}

TEST(Reprsim, HandCorpusGivesExactValues) {
  std::vector<AnnotatedSentence> corpus = {hand_sentence("p1"), hand_sentence("p2")};
  AnnotatedSentence plain;
  plain.sentence_id = "p3";
  plain.tokens = {"x"};
  corpus.push_back(plain);
  TraceSet set;
  set.traces = {hand_trace("p1", 1.0f), hand_trace("p2", 4.0f)};
  for (std::size_t layer = 0; layer <= 2; ++layer) {
    const auto t = sim_groups(corpus, set, {TraceSide::kEncoder, layer});
    ASSERT_TRUE(t.sim_ce && t.sim_co && t.sim_cs);
    EXPECT_EQ(*t.sim_ce, 1.0);
    EXPECT_EQ(*t.sim_co, 0.0);
    EXPECT_EQ(t.n_ce, 2u);
    EXPECT_EQ(t.n_cs, 2u);
    EXPECT_EQ(t.n_co, 4u);
    EXPECT_NEAR(*t.sim_cs, 5.0 / (std::sqrt(10.0) * std::sqrt(5.0)), 1e-7);
  }
}

TEST(Reprsim, MissingTracesAndLayers) {
  std::vector<AnnotatedSentence> corpus = {hand_sentence("p1"), hand_sentence("gone")};
  TraceSet set;
  set.traces = {hand_trace("p1", 1.0f)};
  std::vector<std::string> warnings;
  const auto rows = sim_sweep(corpus, set, parse_layer_list("0..2", TraceSide::kEncoder), &warnings);
  EXPECT_EQ(rows.size(), 3u);
  EXPECT_EQ(warnings.size(), 3u);
  EXPECT_THROW(sim_groups(corpus, set, {TraceSide::kEncoder, 3}), UsageError);
  EXPECT_THROW(sim_groups(corpus, set, {TraceSide::kDecoder, 0}), UsageError);

  std::vector<AnnotatedSentence> none = {hand_sentence("gone")};
  const auto empty = sim_groups(none, set, {TraceSide::kEncoder, 1});
  EXPECT_FALSE(empty.sim_ce.has_value());
  EXPECT_EQ(empty.n_co, 0u);
}

TEST(Reprsim, BucketMergeIsOrderFree) {
  SimBucket a, b;
  a.add(0.25);
  a.add(0.5);
  b.add(1.0);
  SimBucket ab = a, ba = b;
  ab.merge(b);
  ba.merge(a);
  EXPECT_EQ(ab.count, 3u);
  EXPECT_EQ(*ab.mean(), *ba.mean());
  EXPECT_FALSE(SimBucket{}.mean().has_value());
}
