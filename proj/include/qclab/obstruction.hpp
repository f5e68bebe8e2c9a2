#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qclab/flow_graph.hpp"
#include "qclab/geodesics.hpp"
#include "qclab/modulus.hpp"
#include "qclab/volume.hpp"

namespace qclab {

/// Hypotheses: sigma is an (L, b) quasi-isometric embedding of the line and
/// mu(B(sigma(0), r)) <= C0 r^N for r >= R0, with N < Q.
struct ObstructionParams {
  double Q = 4.0;
  double N = 3.0;
  double C0 = 1.0;
  double R0 = 1.0;
  double L = 1.0;
  double b = 1.0;
};

/// Throws std::invalid_argument unless Q > 1, N < Q, C0, R0, b > 0 and L >= 1.
void validate(const ObstructionParams& p);

struct DerivedConstants {
  double R1 = 0.0;
  double t1 = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
};

/// R1 = max(R0, 2b(L^2 + 2)), t1 = L(b + R1), c0 = 4 / b, c1 = 4(L^2 + 1).
DerivedConstants derive_constants(const ObstructionParams& p);

/// Affine distortion bounds x / L - b <= y <= L x + b.
struct AffineBounds {
  double L = 1.0;
  double b = 0.0;
  int samples = 0;
  /// Largest violation of either bound over the samples (<= 0 when all hold).
  double max_violation = 0.0;
};

/// Fits (L, b) to the samples. On the pairs with x at or above the median the ratios
/// y / x have quartiles r1 <= r3; L = max(1, r1, 1 / r3), and b is then the least value
/// for which every sample satisfies both bounds. Throws std::invalid_argument when the
/// ratios vanish (y does not grow with x, so no lower bound exists).
AffineBounds fit_affine_bounds(const std::vector<double>& x, const std::vector<double>& y);

struct QuasiGeodesicOptions {
  /// Sampled parameter pairs for the certificate.
  int certificate_pairs = 60;
  std::uint64_t seed = 0;
  DirectOptions direct{16, 2};
};

/// Continuous path through sigma(k_lo), ..., sigma(k_hi), following an approximate
/// geodesic on every unit parameter interval.
struct QuasiGeodesic {
  SpaceModel space;
  int k_lo = 0;
  int k_hi = 0;
  std::vector<Point3d> knots;
  std::vector<ControlPath> pieces;
  AffineBounds certificate;

  /// Throws CoverageError outside [k_lo, k_hi].
  Point3d operator()(double t) const;
};

/// Joins consecutive integer samples by direct-method geodesics and fits the
/// certificate on random parameter pairs. Throws NonConvergenceError when a gap has no
/// certified geodesic and std::invalid_argument for a range with fewer than two knots
/// or samples violating the lower quasi-isometry bound.
QuasiGeodesic continuify(const std::function<Point3d(int)>& sigma, int k_lo, int k_hi, const SpaceModel& space,
                         const QuasiGeodesicOptions& opt = {});

/// The x-axis t -> (t, 0, 0).
QuasiGeodesic axis_quasi_geodesic(const SpaceModel& space, int extent, const QuasiGeodesicOptions& opt = {});

/// E_n = sigma([-n, -t1]) and F_n = sigma([t1, n]) as node sets.
struct ContinuumPair {
  int n = 0;
  std::vector<NodeId> E;
  std::vector<NodeId> F;
  double e_from = 0.0, e_to = 0.0;
  double f_from = 0.0, f_to = 0.0;
  /// Graph distance from E to F and the allowed shortfall below b.
  double separation = 0.0;
  double slack = 0.0;
  /// Sampled parameters; the samples of pair n are contained in those of pair n + 1.
  std::vector<double> e_params;
  std::vector<double> f_params;
};

/// Parameter samples on the grid of step 1 / per_unit anchored at 0, plus the ends.
std::vector<double> nested_samples(double from, double to, int per_unit);

/// Nodes nearest to sigma on the two ranges. Throws std::invalid_argument for n <= t1
/// and CoverageError when a sample falls outside the lattice.
ContinuumPair build_continua(const QuasiGeodesic& sigma, const LatticeGraph& g, const DerivedConstants& consts, int n);

/// rho = c0 on B(x0, R1) and c1 / d(x, x0) outside, with graph distances from x0.
template <class Graph>
Density decay_density(const Graph& g, NodeId x0, const DerivedConstants& consts);

struct EnergyBound {
  /// Energy of rho over the graph.
  double numeric = 0.0;
  /// c0^Q mu(B(x0, R1)) + tail.
  double analytic = 0.0;
  double ball_measure = 0.0;
  /// C0 c1^N (Q / (Q - N)) (c1 / R1)^(Q - N).
  double tail_closed_form = 0.0;
  /// The same integral C0 c1^N int_0^{(c1/R1)^Q} eta^(-N/Q) d eta by tanh-sinh quadrature.
  double tail_quadrature = 0.0;
  /// rho just outside B(x0, R1) over rho inside: c1 b / (4 R1).
  double jump_ratio = 0.0;
};

/// Closed-form tail C0 c1^N (Q / (Q - N)) (c1 / R1)^(Q - N). Throws for N >= Q.
double energy_tail_closed_form(const ObstructionParams& p, const DerivedConstants& consts);
/// The tail integral evaluated numerically. Throws for N >= Q.
double energy_tail_quadrature(const ObstructionParams& p, const DerivedConstants& consts);

template <class Graph>
EnergyBound density_energy_bound(const Graph& g, NodeId x0, const Density& rho, const ObstructionParams& p,
                                 const DerivedConstants& consts);

struct LengthBoundReport {
  int paths = 0;
  /// min over sampled E-F paths of length * c1 / (2 M), M the largest distance to x0.
  double min_ratio = kInf;
  double witness_length = 0.0;
  double witness_M = 0.0;
  /// Same minimum over the detour paths only.
  double min_detour_ratio = kInf;
  int detour_paths = 0;
};

/// Samples randomized shortest E-F paths and detours through random far nodes.
template <class Graph>
LengthBoundReport length_lower_bound_check(const CurveFamily<Graph>& fam, const DerivedConstants& consts, NodeId x0,
                                           int samples, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Quasi-isometry between (R^3, d_E) and (R^3, d_RT)

/// (floor x, floor y, 2 pi floor(z / 2 pi))
Point3d floor_map(const Point3d& p);

struct QIOptions {
  /// Lattice resolution of the roto-translation distance estimates.
  double h = 1.0;
  std::uint64_t seed = 0;
  int stencil_order = 1;
  std::int64_t max_nodes = 40'000'000;
};

struct QIEstimate {
  double L_hat = 1.0;
  double b_hat = 0.0;
  int samples = 0;
  double max_violation = 0.0;
  /// Fit on a disjoint sample of the same size and the relative changes.
  double L_resample = 1.0;
  double b_resample = 0.0;
  double L_change = 0.0;
  double b_change = 0.0;
  double resample_max_violation = 0.0;
  /// diam_E of [0,1) x [0,1) x [0, 2 pi), and its RT diameter over vertex pairs.
  double R_E = 0.0;
  double R_RT = 0.0;
  /// Largest d_E(0, g) over g in Z^2 x 2 pi Z with d_RT(0, g) <= 2 R_RT + 1.
  double ME = 0.0;
  double h = 0.0;
  std::vector<double> d_E;
  std::vector<double> d_RT;
};

/// Pairs uniform in [0, box]^3. d_RT(p, q) = d_RT(0, p^-1 q) from one search on an
/// implicit lattice about the identity.
QIEstimate estimate_qi_constants(int samples, double box, const QIOptions& opt = {});

// ---------------------------------------------------------------------------
// Experiments

struct VolumeConstants {
  double C0 = 0.0;
  double R0 = 0.0;
  GrowthFit fit;
};

/// R0 = smallest radius, C0 = max V(r) / r^N over the radii.
VolumeConstants fit_volume_constants(const SpaceModel& space, double N, const std::vector<double>& radii, double h);

inline ModulusOptions with_outer_budget(int max_outer) {
  ModulusOptions o;
  o.max_outer = max_outer;
  return o;
}

struct ObstructionConfig {
  double Q = 4.0;
  double N = 3.0;
  /// Smallest admissible b; the certificate's b is raised to it.
  double b_min = 1.0;
  /// Volume fit for C0, R0.
  std::vector<double> volume_radii = {4.0, 5.6568542494923806, 8.0, 11.313708498984761, 16.0};
  double volume_h = 1.0;
  /// Empty picks {t1 + 2, 2 t1, 4 t1, 8 t1}, rounded up and capped by max_index.
  std::vector<int> indices;
  int max_index = 64;
  /// Roto-translation lattice for the source families.
  double source_h = 2.0;
  double theta_halfwidth = 6.283185307179586;
  double source_margin = 6.0;
  /// Heisenberg lattice for the image families, relative to dist(f(E), f(F)).
  double image_h_over_gap = 0.125;
  double image_reach_over_gap = 0.5;
  std::int64_t max_nodes = 4'000'000;
  int admissibility_samples = 16;
  int length_samples = 16;
  /// Image diameters use this many parameter steps per index range.
  int diameter_samples = 12;
  /// Relative allowance in modulus <= energy bound.
  double energy_slack = 0.10;
  /// Outer iteration budgets sized for the default lattices.
  ModulusOptions source_modulus = with_outer_budget(20);
  ModulusOptions image_modulus = with_outer_budget(40);
  QuasiGeodesicOptions sigma;
  std::uint64_t seed = 0;
  /// Called with a stage name as the experiment advances.
  std::function<void(const std::string&)> log;
};

struct SourceRow {
  int n = 0;
  double separation = 0.0;
  double admissibility_min = 0.0;
  double length_ratio_min = 0.0;
  double length_detour_ratio_min = 0.0;
  double modulus_upper = 0.0;
  double modulus_lower = 0.0;
  bool modulus_converged = false;
  int e_nodes = 0;
  int f_nodes = 0;
};

struct ImageRow {
  int n = 0;
  double diam_E = 0.0;
  double diam_F = 0.0;
  double separation = 0.0;
  double ratio = 0.0;
  double modulus_lower = 0.0;
  double modulus_upper = 0.0;
};

struct ObstructionReport {
  ObstructionParams params;
  DerivedConstants consts;
  AffineBounds sigma_certificate;
  VolumeConstants volume;
  std::vector<int> indices;
  int source_nodes = 0;
  int image_nodes = 0;
  EnergyBound energy;
  std::vector<SourceRow> source;
  std::vector<ImageRow> image;
  /// Admissibility, length and separation slack conventions.
  double admissibility_slack = 0.05;
  double separation_slack = 0.0;
  // assertions
  bool source_admissible = false;
  bool source_bounded = false;
  bool source_lower_monotone = false;
  bool separated = false;
  bool nested = false;
  bool image_diam_growth = false;
  bool image_separation_bounded = false;
  bool image_ratio_decreasing = false;
  bool image_lower_monotone = false;
  double seconds_sigma = 0.0;
  double seconds_source = 0.0;
  double seconds_image = 0.0;
  bool completed = false;
  std::string error;
  /// "non-convergence", "resource-cap", "coverage" or "other" when error is set.
  std::string error_kind;
  std::string note;
};

/// Sigma = continuified x-axis of RT; (L, b) from its certificate with b >= b_min;
/// C0, R0 from the volume fit. Source families Gamma_n in RT and their images under the
/// contactomorphism in H1. A failing stage is recorded in `error` and the partial
/// report returned.
ObstructionReport run_obstruction_experiment(const ObstructionConfig& cfg);

struct BoundedLoewnerRow {
  double t = 0.0;
  int n = 0;
  double ratio = 0.0;
  double modulus_upper = 0.0;
  double modulus_lower = 0.0;
};

struct BoundedLoewnerReport {
  SpaceId space = SpaceId::roto_translation;
  bool hypothesis_met = false;
  ObstructionParams params;
  DerivedConstants consts;
  double energy_bound = 0.0;
  std::vector<BoundedLoewnerRow> rows;
  /// Upper bound for the first t at a larger n.
  int rerun_n = 0;
  double rerun_upper = 0.0;
  bool bounded = false;
  std::string note;
};

/// For each t the smallest index n whose pair has dist / min diam <= t (graph
/// estimates), then modulus bounds of Gamma_n against the energy bound of rho. Only
/// roto-translation satisfies the hypotheses; other spaces are reported as unmet.
/// Uses the lattice and modulus settings of cfg; params are validated.
BoundedLoewnerReport bounded_loewner_check(const SpaceModel& space, const ObstructionParams& params,
                                           const std::vector<double>& t_list, const ObstructionConfig& cfg = {});

nlohmann::json to_json(const ObstructionParams& p);
nlohmann::json to_json(const DerivedConstants& c);
nlohmann::json to_json(const AffineBounds& a);
nlohmann::json to_json(const EnergyBound& e);
nlohmann::json to_json(const LengthBoundReport& r);
nlohmann::json to_json(const QIEstimate& q, bool include_samples = false);
nlohmann::json to_json(const ObstructionReport& r);
nlohmann::json to_json(const BoundedLoewnerReport& r);
/// Rows "n,source_lower,source_upper,image_lower,image_upper,diam_E,diam_F,separation".
std::string to_csv(const ObstructionReport& r);

}  // namespace qclab
