#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "qclab/flow_graph.hpp"
#include "qclab/spaces.hpp"

namespace qclab {

enum class DistanceMethod { direct, graph };

struct DistanceResult {
  double value = 0.0;
  DistanceMethod method = DistanceMethod::direct;
  ControlPath path;                 // direct certificate
  std::vector<Point3d> node_path;   // graph certificate (node positions)
  double gap_hint = std::numeric_limits<double>::quiet_NaN();
  double endpoint_error = 0.0;
  bool converged = true;
  int segments = 0;
  /// Best certified value after each penalty round (nonincreasing).
  std::vector<double> round_values;
};

struct DirectOptions {
  int segments = 32;
  int restarts = 8;  // random starts in addition to the straight start
  int penalty_rounds = 7;  // mu = 10^0 .. 10^6
  int inner_iterations = 500;
  double endpoint_tolerance = 1e-4;
  bool refine_on_stall = true;
  std::uint64_t seed = 0;
};

/// Length of an explicit horizontal path from p to q: an upper bound on d(p, q).
/// Heisenberg: segment then a circular loop; RT: turn, drive, turn; Euclidean: |q - p|.
double explicit_upper_bound(const SpaceModel& space, const Point3d& p, const Point3d& q);

/// Shortest piecewise-constant control path found by penalized energy minimization.
///
/// With K segments of duration 1/K the energy (1/K) sum |u_i|^2 / s^2 is minimized under
/// the penalty mu |endpoint - q|^2, mu = 10^k. s = max(1, explicit upper bound) keeps the
/// schedule scale free. A start counts once its endpoint error is below the tolerance;
/// the reported value is the length of the best such path.
DistanceResult cc_distance_direct(const SpaceModel& space, const Point3d& p, const Point3d& q,
                                  const DirectOptions& opt = {});

/// Dijkstra distance on an implicit flow lattice centered at p covering the explicit
/// upper bound. The snapping distance of q to its node is added.
DistanceResult cc_distance_graph(const SpaceModel& space, const Point3d& p, const Point3d& q, double h,
                                 const GraphOptions& opt = {});

}  // namespace qclab
