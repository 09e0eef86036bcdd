#include <gtest/gtest.h>

#include <random>

#include "negmt/errors.hpp"
#include "negmt/maxflow.hpp"
#include "oracles.hpp"

using namespace negmt;

namespace {

void expect_feasible(const FlowNetwork& net, const MaxFlowResult& r, std::size_t s, std::size_t t) {
  ASSERT_EQ(r.edge_flow.size(), net.edges.size());
  std::vector<double> balance(net.node_count, 0.0);
  for (std::size_t i = 0; i < net.edges.size(); ++i) {
    const auto& e = net.edges[i];
    EXPECT_GE(r.edge_flow[i], -1e-12);
    EXPECT_LE(r.edge_flow[i], e.capacity + 1e-12);
    balance[e.from] -= r.edge_flow[i];
    balance[e.to] += r.edge_flow[i];
  }
  for (std::size_t v = 0; v < net.node_count; ++v) {
    if (v == s) {
      EXPECT_NEAR(balance[v], -r.value, 1e-9);
    } else if (v == t) {
      EXPECT_NEAR(balance[v], r.value, 1e-9);
    } else {
      EXPECT_NEAR(balance[v], 0.0, 1e-9) << "node " << v;
    }
  }
}

}  // namespace

TEST(MaxFlow, TextbookNetwork) {
  // CLRS figure 26.1, max flow 23.
  FlowNetwork net;
  net.node_count = 6;
  net.add_edge(0, 1, 16);
  net.add_edge(0, 2, 13);
  net.add_edge(2, 1, 4);
  net.add_edge(1, 3, 12);
  net.add_edge(3, 2, 9);
  net.add_edge(2, 4, 14);
  net.add_edge(4, 3, 7);
  net.add_edge(3, 5, 20);
  net.add_edge(4, 5, 4);
  const auto r = max_flow(net, 0, 5);
  EXPECT_DOUBLE_EQ(r.value, 23.0);
  expect_feasible(net, r, 0, 5);
}

TEST(MaxFlow, ParallelEdgesAndDisconnectedSink) {
  FlowNetwork net;
  net.node_count = 3;
  net.add_edge(0, 1, 0.25);
  net.add_edge(0, 1, 0.5);
  EXPECT_DOUBLE_EQ(max_flow(net, 0, 1).value, 0.75);
  EXPECT_DOUBLE_EQ(max_flow(net, 0, 2).value, 0.0);
}

TEST(MaxFlow, RejectsBadArguments) {
  FlowNetwork net;
  net.node_count = 2;
  net.add_edge(0, 1, 1.0);
  EXPECT_THROW(max_flow(net, 0, 0), UsageError);
  EXPECT_THROW(max_flow(net, 0, 2), UsageError);
  net.add_edge(1, 0, -1.0);
  EXPECT_THROW(max_flow(net, 0, 1), ValidationError);
  net.edges.back().capacity = std::nan("");
  EXPECT_THROW(max_flow(net, 0, 1), ValidationError);
}

TEST(MaxFlow, MatchesMinCutEnumerationOnRandomLayeredGraphs) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = oracle::random_layered_graph(rng);
    ASSERT_LE(g.net.node_count, 12u);
    const auto r = max_flow(g.net, g.source, g.sink);
    EXPECT_NEAR(r.value, oracle::min_cut_enumeration(g.net, g.source, g.sink), 1e-9);
    expect_feasible(g.net, r, g.source, g.sink);
  }
}

TEST(MaxFlow, MatchesMinCutOnGeneralDigraphs) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> nodes(2, 9);
  std::uniform_real_distribution<double> cap(0.0, 2.0);
  std::bernoulli_distribution keep(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    FlowNetwork net;
    net.node_count = nodes(rng);
    for (std::size_t a = 0; a < net.node_count; ++a) {
      for (std::size_t b = 0; b < net.node_count; ++b) {
        if (a != b && keep(rng)) net.add_edge(a, b, cap(rng));
      }
    }
    const std::size_t t = net.node_count - 1;
    const auto r = max_flow(net, 0, t);
    EXPECT_NEAR(r.value, oracle::min_cut_enumeration(net, 0, t), 1e-9);
    expect_feasible(net, r, 0, t);
  }
}
