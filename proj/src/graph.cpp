#include "qclab/graph.hpp"

#include <numeric>
#include <stdexcept>

namespace qclab {

WeightedGraph WeightedGraph::from_edges(NodeId num_nodes, std::vector<Edge> edges, std::vector<double> node_measure) {
  if (num_nodes < 0) throw std::invalid_argument("negative node count");
  if (static_cast<NodeId>(node_measure.size()) != num_nodes)
    throw std::invalid_argument("node_measure size does not match node count");
  for (auto& e : edges) {
    if (e.i < 0 || e.j < 0 || e.i >= num_nodes || e.j >= num_nodes) throw std::out_of_range("edge endpoint out of range");
    if (!(e.length > 0.0) || !std::isfinite(e.length)) throw std::invalid_argument("edge lengths must be positive and finite");
    if (e.i > e.j) std::swap(e.i, e.j);
  }
  std::erase_if(edges, [](const Edge& e) { return e.i == e.j; });
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.i, a.j, a.length) < std::tie(b.i, b.j, b.length);
  });
  edges.erase(std::unique(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.i == b.i && a.j == b.j; }),
              edges.end());

  WeightedGraph g;
  g.node_measure_ = std::move(node_measure);
  std::vector<std::int64_t> degree(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (const auto& e : edges) {
    ++degree[e.i + 1];
    ++degree[e.j + 1];
  }
  std::partial_sum(degree.begin(), degree.end(), degree.begin());
  g.offsets_ = degree;
  g.targets_.resize(2 * edges.size());
  g.lengths_.resize(2 * edges.size());
  std::vector<std::int64_t> fill(degree.begin(), degree.end() - 1);
  for (const auto& e : edges) {
    g.targets_[fill[e.i]] = e.j;
    g.lengths_[fill[e.i]++] = e.length;
    g.targets_[fill[e.j]] = e.i;
    g.lengths_[fill[e.j]++] = e.length;
  }
  return g;
}

double WeightedGraph::edge_length(NodeId u, NodeId v) const {
  double best = kInf;
  for (std::int64_t e = offsets_[u]; e < offsets_[u + 1]; ++e)
    if (targets_[e] == v) best = std::min(best, lengths_[e]);
  return best;
}

double WeightedGraph::total_measure() const {
  return std::accumulate(node_measure_.begin(), node_measure_.end(), 0.0);
}

std::vector<Edge> WeightedGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(targets_.size() / 2);
  for (NodeId u = 0; u < num_nodes(); ++u)
    for (std::int64_t e = offsets_[u]; e < offsets_[u + 1]; ++e)
      if (u < targets_[e]) out.push_back({u, targets_[e], lengths_[e]});
  return out;
}

std::vector<NodeId> extract_path(const ShortestPaths& sp, NodeId target) {
  std::vector<NodeId> path;
  if (target < 0 || static_cast<std::size_t>(target) >= sp.dist.size() || !std::isfinite(sp.dist[target])) return path;
  for (NodeId v = target; v != kNoNode; v = sp.parent[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace qclab
