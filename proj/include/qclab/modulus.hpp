#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qclab/flow_graph.hpp"
#include "qclab/graph.hpp"

namespace qclab {

/// Nonnegative per-node density.
struct Density {
  std::vector<double> values;
};

/// The family of paths in `graph` that start in E and end in F.
template <class Graph>
struct CurveFamily {
  const Graph* graph = nullptr;
  std::vector<NodeId> E;
  std::vector<NodeId> F;
};

/// Throws std::invalid_argument unless E and F are nonempty, disjoint and in range.
template <class Graph>
void validate_family(const CurveFamily<Graph>& fam);

/// True when the nodes of `set` induce a connected subgraph.
template <class Graph>
bool induces_connected(const Graph& g, const std::vector<NodeId>& set);

/// Sum over consecutive nodes of (rho_i + rho_j)/2 * edge length. Throws when two
/// consecutive nodes are not adjacent.
template <class Graph>
double path_integral(const Graph& g, const Density& rho, const std::vector<NodeId>& path);

/// Sum of node_measure_i * rho_i^Q.
template <class Graph>
double energy(const Graph& g, const Density& rho, double Q);

struct AdmissibilityReport {
  double min_integral = 0.0;
  std::vector<NodeId> witness;
  int sampled_paths = 0;
  bool connected = true;
  std::string note;
};

/// Minimum of the rho-integral over the rho-shortest E-F path (the exact discrete
/// minimum) and over `samples` randomized paths between random endpoint pairs.
template <class Graph>
AdmissibilityReport admissibility_check(const CurveFamily<Graph>& fam, const Density& rho, int samples,
                                        std::uint64_t seed = 0);

struct ModulusResult {
  double upper = 0.0;
  double lower = 0.0;
  double relative_gap = 0.0;
  /// Density achieving `upper`, scaled so that every E-F path has integral >= 1.
  Density density;
  /// Minimum E-F integral of the unscaled density at the final round.
  double min_integral = 0.0;
  int active_paths = 0;
  int iterations = 0;
  int inner_sweeps = 0;
  bool converged = false;
  std::string note;
  std::string method;
  /// Active constraint paths and their multipliers (constraint generation), or the
  /// dual edge flow attaining `lower`, in neighbor-enumeration order (primal-dual); reusable as a warm start.
  std::vector<std::vector<NodeId>> paths;
  std::vector<double> multipliers;
  std::vector<double> flow;
};

enum class ModulusMethod { primal_dual, constraint_generation };

struct ModulusProgress {
  int outer = 0;
  int active_paths = 0;
  int inner_sweeps = 0;
  double lower = 0.0;
  double upper = 0.0;
  double min_integral = 0.0;
};

struct ModulusOptions {
  ModulusMethod method = ModulusMethod::primal_dual;
  /// Stop once the relative gap between the bounds is at most tol (primal-dual), or
  /// once the shortest E-F integral is at least 1 - tol (constraint generation).
  double tol = 0.02;
  int max_outer = 200;
  /// Coordinate sweeps per round (constraint generation).
  int max_inner = 2000;
  /// Primal-dual steps per round.
  int epoch = 100;
  /// Most new paths per outer round.
  int batch = 64;
  /// Let the batch grow to the current number of active paths.
  bool batch_growth = true;
  /// Require the paths added in one round to have disjoint interiors.
  bool disjoint_paths = false;
  /// Also add violated paths through interior nodes (shortest E-v plus v-F), which
  /// spreads the active set over a cut quickly. Used only on symmetric graphs.
  bool through_paths = true;
  /// Relative gap at which the restricted problem counts as solved.
  double inner_tolerance = 2e-3;
  /// Relative gap required for the converged flag.
  double max_gap = 0.10;
  const ModulusResult* warm_start = nullptr;
  /// Called after every outer round.
  std::function<void(const ModulusProgress&)> progress;
};

/// Discrete Q-modulus of the E-F family: min sum mu_i rho_i^Q over rho >= 0 with
/// every E-F path integral >= 1. Both methods report certified bounds: upper is the
/// energy of rho / m with m the rho-shortest E-F integral, so the reported density is
/// admissible; lower is a dual value.
///
/// primal_dual solves the equivalent problem in (rho, phi) with phi = 0 on E, phi = 1
/// on F and phi_v - phi_u <= len (rho_u + rho_v) / 2 on every edge, by diagonally
/// preconditioned primal-dual steps with an adaptive primal weight. The edge flow f is
/// the dual variable; for any f >= 0,
///   sum_F netin(f) + sum_interior min(0, netin(f)) - (Q-1) sum mu rho(s)^Q,
/// with s_v = sum of f len / 2 over edges at v and rho(s) = (s / (Q mu))^(1/(Q-1)),
/// is a lower bound (phi may be taken in [0, 1]), maximized over scalings of f.
///
/// constraint_generation keeps an active path set, solves the restricted dual by
/// exact coordinate ascent on the path multipliers, and adds violated rho-shortest
/// paths until m >= 1 - tol; lower is the restricted optimum.
///
/// A warm start from a family on the same graph carries its flow or paths; for a
/// larger family the lower bound then starts at the smaller family's value.
template <class Graph>
ModulusResult q_modulus(const CurveFamily<Graph>& fam, double Q, const ModulusOptions& opt = {});

nlohmann::json to_json(const ModulusResult& r, bool include_density = false);

// ---------------------------------------------------------------------------
// Planar test geometry

struct PlanarGraph {
  WeightedGraph graph;
  std::vector<Eigen::Vector2d> points;
  std::vector<NodeId> inner;
  std::vector<NodeId> outer;
};

/// Polar grid on r_in <= |x| <= r_out: rings spaced about h apart from r_in to r_out
/// inclusive, sectors of arc about h at the middle radius, and straight edges along all
/// primitive (ring, sector) offsets with entries at most `reach`. Node measure is the
/// area of the polar cell clipped to the annulus; `inner`, `outer` are the two
/// boundary rings.
PlanarGraph build_annulus_graph(double r_in, double r_out, double h, int reach = 2);

/// rho(x) = 1 / (|x| log(r_out / r_in)).
Density annulus_extremal_density(const PlanarGraph& g, double r_in, double r_out);

// ---------------------------------------------------------------------------
// Loewner function samples

struct LoewnerSample {
  double t = 0.0;
  double separation = 0.0;
  double min_diam = 0.0;
  ModulusResult modulus;
};

struct LoewnerOptions {
  /// Lattice resolution relative to the segment length.
  double h_over_scale = 1.0 / 16.0;
  /// Box margin around the configuration, relative to the segment length.
  double margin = 0.25;
  int stencil_order = 0;
  std::int64_t max_nodes = 4'000'000;
  ModulusOptions modulus;
};

/// Two collinear segments of the X-axis, each of length `scale`, separated by t*scale,
/// symmetric about the identity: E = [-(1 + t/2) D, -t D / 2], F = [t D / 2, (1 + t/2) D].
/// The x-axis is a geodesic line in all three models, so separation / min diameter = t.
LoewnerSample loewner_estimate(const SpaceModel& space, double Q, double t, double scale,
                               const LoewnerOptions& opt = {});

/// Samples for several t on one shared lattice sized for the largest t.
std::vector<LoewnerSample> loewner_series(const SpaceModel& space, double Q, const std::vector<double>& t_list,
                                          double scale, const LoewnerOptions& opt = {});

nlohmann::json to_json(const LoewnerSample& s);

}  // namespace qclab
