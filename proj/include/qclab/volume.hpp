#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "qclab/flow_graph.hpp"

namespace qclab {

struct GrowthFit {
  std::vector<double> radii;
  std::vector<double> volumes;
  /// Resolution used for each radius.
  std::vector<double> h;
  std::string method;
  double exponent = 0.0;
  double intercept = 0.0;  // log C in V ~ C r^exponent
  double residual = 0.0;   // rms of the log residuals
};

/// Sum of node measures within graph distance r of center. Throws CoverageError when r
/// exceeds the build radius or the ball reaches the edge of the lattice box.
double ball_volume(const FlowGraph& g, NodeId center, double r);

/// Ball volumes for several radii from one search on an implicit lattice.
std::vector<double> ball_volumes(const LatticeGraph& g, NodeId center, const std::vector<double>& radii);

/// Ball volumes about the identity on a lattice at resolution h. The box margin is doubled
/// until the largest ball is interior; throws ResourceCapError past opt.max_implicit_nodes.
std::vector<double> lattice_ball_volumes(const SpaceModel& space, const std::vector<double>& radii, double h,
                                         GraphOptions opt = {});

/// Unweighted least-squares line through (log r, log V).
GrowthFit fit_growth(std::vector<double> radii, std::vector<double> volumes);

GrowthFit growth_exponent(const FlowGraph& g, NodeId center, const std::vector<double>& radii);

/// One implicit lattice of resolution h about the identity, large enough for the
/// largest radius.
GrowthFit growth_fit_fixed(const SpaceModel& space, const std::vector<double>& radii, double h,
                           const GraphOptions& opt = {});

/// A separate lattice per radius with resolution h = h_over_r * r.
GrowthFit growth_fit_scaled(const SpaceModel& space, const std::vector<double>& radii, double h_over_r,
                            const GraphOptions& opt = {});

/// n radii spaced evenly in log between lo and hi.
std::vector<double> log_spaced(double lo, double hi, int n);

nlohmann::json to_json(const GrowthFit& fit);
/// Rows "radius,volume,method,h" with a header naming units.
std::string to_csv(const GrowthFit& fit);

}  // namespace qclab
