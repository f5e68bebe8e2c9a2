#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qclab/graph.hpp"
#include "qclab/spaces.hpp"

namespace qclab {

using Index3 = Eigen::Vector3i;

/// One stencil move: the group element reached by flowing `control` for `duration`
/// from the identity.
struct Move {
  Vector3d control = Vector3d::Zero();
  double duration = 1.0;
  double length = 0.0;
  Point3d increment = Point3d::Zero();
  // roto-translation only
  double cos_phi = 1.0;
  double sin_phi = 0.0;
  int layer_shift = 0;
};

/// Regular grid in chart coordinates with a fixed move stencil.
///
/// Charts: the identity for Heisenberg and Euclidean space; for roto-translation the
/// chart (a, b, th) stands for the point (R(th)(a, b), th), so (a, b) are coordinates
/// in the moving frame. In that chart a left-invariant move is the same affine map on
/// every layer and the node cells have unit Jacobian.
///
/// Node positions are center * chart_point(index).
struct LatticeSpec {
  SpaceModel space;
  Point3d center = Point3d::Zero();
  Vector3d step = Vector3d::Ones();
  Index3 lo = Index3::Zero();
  Index3 hi = Index3::Zero();
  /// 1: {+-X, +-Y, +-X+-Y}; 2 adds the knight moves. For Euclidean space, the largest
  /// component of the primitive integer directions. 0 picks 1 for the groups and 3 for
  /// Euclidean space.
  int stencil_order = 0;
  /// Nominal resolution the steps were derived from.
  double h = 0.0;
  /// Heisenberg only: chart (x, y, t + 2xy), in which left translation along the
  /// x-axis is a shift of the first index.
  bool sheared = false;
};

/// Default chart steps for resolution h: Heisenberg (h, h, 2h^2), roto-translation
/// (h, h min(h, 1/2), min(h, 1/2)), Euclidean (h, h, h).
Vector3d default_steps(const SpaceModel& space, double h);

/// Index box containing the ball of radius `radius` about the center, with a margin of
/// `margin_cells` cells on every side.
void fit_box(LatticeSpec& spec, double radius, int margin_cells = 3);

std::vector<Move> make_stencil(const SpaceModel& space, const Vector3d& step, int order);

/// Implicit graph on a lattice box: neighbours are generated on demand, so only the
/// per-node Dijkstra arrays are stored. Edges are directed; the target of a move is
/// the node nearest to the exact arc endpoint, and the edge length is arc length plus
/// the chart distance between the two (zero on the Heisenberg and Euclidean lattices).
class LatticeGraph {
 public:
  explicit LatticeGraph(LatticeSpec spec);

  const LatticeSpec& spec() const { return spec_; }
  const std::vector<Move>& moves() const { return moves_; }
  NodeId num_nodes() const { return num_nodes_; }
  Index3 extent() const { return spec_.hi - spec_.lo + Index3::Ones(); }

  NodeId id(const Index3& idx) const;
  Index3 index(NodeId u) const;
  bool contains(const Index3& idx) const;
  bool on_boundary(NodeId u) const;

  Point3d chart_point(const Index3& idx) const;
  /// Point in R^3 relative to the identity (before translating by the center).
  Point3d local_point(NodeId u) const;
  Point3d position(NodeId u) const;
  double cell_volume() const { return spec_.step.prod(); }
  double node_measure(NodeId) const { return cell_volume(); }

  /// Nearest lattice node to p, or nullopt outside the box.
  std::optional<NodeId> nearest(const Point3d& p) const;
  /// Chart distance from p to its nearest node.
  double snap_error(const Point3d& p) const;

  /// Shortest move from u to v, or +inf when v is not a move target of u.
  double edge_length(NodeId u, NodeId v) const {
    double best = kInf;
    for_each_neighbor(u, [&](NodeId w, double len) {
      if (w == v) best = std::min(best, len);
    });
    return best;
  }

  template <class F>
  void for_each_neighbor(NodeId u, F&& f) const {
    const Index3 idx = index(u);
    const Vector3d c = chart_coords(idx);
    for (const Move& m : moves_) {
      Vector3d cn;
      Index3 in;
      double err = 0.0;
      if (!apply(idx, c, m, cn, in, err)) continue;
      f(id(in), m.length + err);
    }
  }

 private:
  Vector3d chart_coords(const Index3& idx) const { return idx.cast<double>().cwiseProduct(spec_.step); }
  Vector3d to_chart(const Point3d& local) const;
  Point3d from_chart(const Vector3d& c) const;
  bool apply(const Index3& idx, const Vector3d& c, const Move& m, Vector3d& cn, Index3& in, double& err) const;

  LatticeSpec spec_;
  std::vector<Move> moves_;
  NodeId num_nodes_ = 0;
};

struct BuildParams {
  double h = 0.0;
  double radius_hint = 0.0;
  Vector3d step = Vector3d::Zero();
  Index3 lo = Index3::Zero();
  Index3 hi = Index3::Zero();
  Point3d center = Point3d::Zero();
  int stencil_order = 0;
  std::string stencil;
};

/// A materialized, symmetric flow graph. When both directions of a lattice move exist
/// the shorter length is kept.
struct FlowGraph {
  SpaceModel space;
  std::vector<Point3d> nodes;
  WeightedGraph graph;
  BuildParams params;
  std::optional<LatticeGraph> lattice;

  NodeId num_nodes() const { return graph.num_nodes(); }
  template <class F>
  void for_each_neighbor(NodeId u, F&& f) const {
    graph.for_each_neighbor(u, std::forward<F>(f));
  }
  double node_measure(NodeId u) const { return graph.node_measure(u); }

  /// Nearest node (lattice lookup when available, otherwise linear scan in coordinates).
  NodeId nearest(const Point3d& p) const;
};

struct GraphOptions {
  int stencil_order = 0;
  int margin_cells = 3;
  std::int64_t max_nodes = 4'000'000;
  /// Cap for implicit lattices, which store only per-node search arrays.
  std::int64_t max_implicit_nodes = 40'000'000;
};

std::string describe_stencil(const LatticeSpec& spec);

/// Lattice box covering the ball of radius radius_hint about center at resolution h.
LatticeSpec flow_lattice_spec(const SpaceModel& space, const Point3d& center, double radius_hint, double h,
                              const GraphOptions& opt = {});

FlowGraph build_flow_graph(const SpaceModel& space, const Point3d& center, double radius_hint, double h,
                           const GraphOptions& opt = {});
FlowGraph materialize(const LatticeSpec& spec, std::int64_t max_nodes = 4'000'000);

/// Shortest-path lengths from source; unreachable targets map to +inf.
std::vector<double> graph_distance(const FlowGraph& g, NodeId source, const std::vector<NodeId>& targets);

inline constexpr int kFlowGraphFormatVersion = 1;
std::string flow_graph_to_json(const FlowGraph& g);
FlowGraph flow_graph_from_json(const std::string& text);

}  // namespace qclab
