#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <tuple>
#include <vector>

#include "qclab/types.hpp"

namespace qclab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Edge {
  NodeId i = 0;
  NodeId j = 0;
  double length = 0.0;
};

/// Undirected weighted graph in compressed adjacency form. Each undirected edge is
/// stored once in each direction with the same length.
class WeightedGraph {
 public:
  WeightedGraph() = default;

  /// Duplicate pairs keep the shortest length; self-loops are dropped.
  static WeightedGraph from_edges(NodeId num_nodes, std::vector<Edge> edges, std::vector<double> node_measure);

  NodeId num_nodes() const { return static_cast<NodeId>(offsets_.size()) - 1; }
  std::int64_t num_directed_edges() const { return static_cast<std::int64_t>(targets_.size()); }

  template <class F>
  void for_each_neighbor(NodeId u, F&& f) const {
    for (std::int64_t e = offsets_[u]; e < offsets_[u + 1]; ++e) f(targets_[e], lengths_[e]);
  }

  /// Length of the edge u-v, or +inf when the nodes are not adjacent.
  double edge_length(NodeId u, NodeId v) const;

  double node_measure(NodeId u) const { return node_measure_[u]; }
  const std::vector<double>& node_measures() const { return node_measure_; }
  double total_measure() const;

  /// Unique undirected edges with i < j.
  std::vector<Edge> edges() const;

 private:
  std::vector<std::int64_t> offsets_{0};
  std::vector<NodeId> targets_;
  std::vector<double> lengths_;
  std::vector<double> node_measure_;
};

struct ShortestPaths {
  std::vector<double> dist;
  std::vector<NodeId> parent;
};

/// Edge cost = the stored length.
struct LengthWeight {
  double operator()(NodeId, NodeId, double length) const { return length; }
};

/// Multi-source Dijkstra. Works on any graph exposing num_nodes() and
/// for_each_neighbor(u, f(v, length)). `weight(u, v, length)` must be nonnegative.
/// Nodes farther than `cutoff` are left at +inf. Ties break on node id, so results
/// are deterministic.
template <class Graph, class Weight = LengthWeight>
ShortestPaths dijkstra(const Graph& g, std::span<const NodeId> sources, Weight&& weight = {}, double cutoff = kInf) {
  const auto n = static_cast<std::size_t>(g.num_nodes());
  ShortestPaths sp;
  sp.dist.assign(n, kInf);
  sp.parent.assign(n, kNoNode);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (NodeId s : sources) {
    if (sp.dist[s] > 0.0) {
      sp.dist[s] = 0.0;
      heap.emplace(0.0, s);
    }
  }
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > sp.dist[u]) continue;
    g.for_each_neighbor(u, [&](NodeId v, double length) {
      const double nd = d + weight(u, v, length);
      if (nd < sp.dist[v] && nd <= cutoff) {
        sp.dist[v] = nd;
        sp.parent[v] = u;
        heap.emplace(nd, v);
      }
    });
  }
  return sp;
}

template <class Graph, class Weight = LengthWeight>
ShortestPaths dijkstra(const Graph& g, NodeId source, Weight&& weight = {}, double cutoff = kInf) {
  const NodeId src[1] = {source};
  return dijkstra(g, std::span<const NodeId>(src), std::forward<Weight>(weight), cutoff);
}

/// Follows parents back from `target`; the returned path starts at a source.
/// Empty when the target was not reached.
std::vector<NodeId> extract_path(const ShortestPaths& sp, NodeId target);

}  // namespace qclab
