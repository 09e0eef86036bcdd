#pragma once

#include <cstddef>
#include <vector>

namespace negmt {

struct FlowEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  double capacity = 0.0;
};

/// Directed capacity network over nodes 0..node_count-1.
struct FlowNetwork {
  std::size_t node_count = 0;
  std::vector<FlowEdge> edges;

  void add_edge(std::size_t from, std::size_t to, double capacity) {
    edges.push_back({from, to, capacity});
  }
};

struct MaxFlowResult {
  double value = 0.0;
  /// Flow on each edge of the input network, same order as `edges`.
  std::vector<double> edge_flow;
};

/// Exact maximum s-t flow (Dinic's algorithm). Throws UsageError when
/// source == sink or either is out of range, ValidationError on a negative or
/// non-finite capacity.
MaxFlowResult max_flow(const FlowNetwork& network, std::size_t source, std::size_t sink);

}  // namespace negmt
