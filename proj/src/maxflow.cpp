#include "negmt/maxflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "negmt/errors.hpp"

namespace negmt {

namespace {

// Residual arcs below this are treated as saturated. Capacities here are
// attention weights in [0, 1], so this sits far below any meaningful value.
constexpr double kEps = 1e-14;

class Dinic {
 public:
  explicit Dinic(std::size_t n) : adj_(n), level_(n), next_(n) {}

  std::size_t add(std::size_t u, std::size_t v, double cap) {
    adj_[u].push_back(arcs_.size());
    arcs_.push_back({v, cap});
    adj_[v].push_back(arcs_.size());
    arcs_.push_back({u, 0.0});
    return arcs_.size() - 2;
  }

  double run(std::size_t s, std::size_t t) {
    double total = 0.0;
    while (bfs(s, t)) {
      std::fill(next_.begin(), next_.end(), 0);
      while (double pushed = dfs(s, t, std::numeric_limits<double>::infinity())) {
        total += pushed;
      }
    }
    return total;
  }

  double residual(std::size_t arc) const { return arcs_[arc].cap; }

 private:
  struct Arc {
    std::size_t to;
    double cap;
  };

  bool bfs(std::size_t s, std::size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<std::size_t> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (auto a : adj_[u]) {
        const auto& arc = arcs_[a];
        if (arc.cap > kEps && level_[arc.to] < 0) {
          level_[arc.to] = level_[u] + 1;
          q.push(arc.to);
        }
      }
    }
    return level_[t] >= 0;
  }

  double dfs(std::size_t u, std::size_t t, double limit) {
    if (u == t) return limit;
    for (auto& i = next_[u]; i < adj_[u].size(); ++i) {
      const auto a = adj_[u][i];
      auto& arc = arcs_[a];
      if (arc.cap <= kEps || level_[arc.to] != level_[u] + 1) continue;
      const double pushed = dfs(arc.to, t, std::min(limit, arc.cap));
      if (pushed > 0.0) {
        arc.cap -= pushed;
        arcs_[a ^ 1].cap += pushed;
        return pushed;
      }
    }
    return 0.0;
  }

  std::vector<std::vector<std::size_t>> adj_;
  std::vector<Arc> arcs_;
  std::vector<int> level_;
  std::vector<std::size_t> next_;
};

}  // namespace

MaxFlowResult max_flow(const FlowNetwork& network, std::size_t source, std::size_t sink) {
  if (source >= network.node_count || sink >= network.node_count) {
    throw UsageError("max_flow: node index out of range");
  }
  if (source == sink) throw UsageError("max_flow: source and sink are the same node");

  Dinic dinic(network.node_count);
  std::vector<std::size_t> arc_of(network.edges.size());
  for (std::size_t e = 0; e < network.edges.size(); ++e) {
    const auto& edge = network.edges[e];
    if (!(edge.capacity >= 0.0) || !std::isfinite(edge.capacity)) {
      throw ValidationError("max_flow: edge " + std::to_string(e) + " has invalid capacity");
    }
    if (edge.from >= network.node_count || edge.to >= network.node_count) {
      throw ValidationError("max_flow: edge " + std::to_string(e) + " references a missing node");
    }
    arc_of[e] = dinic.add(edge.from, edge.to, edge.capacity);
  }

  MaxFlowResult result;
  result.value = dinic.run(source, sink);
  result.edge_flow.resize(network.edges.size());
  for (std::size_t e = 0; e < network.edges.size(); ++e) {
    const double cap = network.edges[e].capacity;
    result.edge_flow[e] = std::clamp(cap - dinic.residual(arc_of[e]), 0.0, cap);
  }
  return result;
}

}  // namespace negmt
