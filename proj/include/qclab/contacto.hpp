#pragma once

#include <cstdint>

#include <json.hpp>

#include "qclab/geodesics.hpp"
#include "qclab/spaces.hpp"

namespace qclab {

/// Image under f : RT -> H1 and the Jacobian of f at the source point.
struct ContactMapResult {
  Point3d image = Point3d::Zero();
  Matrix3d jacobian = Matrix3d::Zero();
};

/// f(x, y, th) = (-x cos th - y sin th, th, 4x sin th - 4y cos th - 2x th cos th - 2y th sin th),
/// which satisfies f* beta = 4 alpha.
ContactMapResult contacto_map(const Point3d& p);

/// Central differences of f with step h.
Matrix3d contacto_jacobian_fd(const Point3d& p, double h = 1e-5);

/// f^-1(q). theta is q's second coordinate; (x, y) solve a 2x2 linear system of
/// determinant 4. Throws NonConvergenceError when the round trip misses by more than tol.
Point3d contacto_inverse(const Point3d& q, double tol = 1e-9);

struct PullbackReport {
  int samples = 0;
  /// max |beta(Df v) - 4 alpha(v)| / (1 + |4 alpha(v)|)
  double max_error = 0.0;
  /// Same with the finite-difference Jacobian.
  double max_error_fd = 0.0;
  /// Largest entrywise difference between the analytic and finite-difference Jacobians.
  double max_jacobian_gap = 0.0;
};

/// Random p in [-box, box]^3 and v in [-1, 1]^3.
PullbackReport pullback_check(int samples, std::uint64_t seed = 0, double box = 5.0);

struct HorizontalityReport {
  int samples = 0;
  /// max over p of |beta(Df X)| and |beta(Df Y)|
  double max_defect = 0.0;
  /// |beta(Df d/dx)| at th = pi/4; d/dx is not horizontal there, so this must not vanish.
  double vertical_control = 0.0;
};

HorizontalityReport pushforward_horizontality_check(int samples, std::uint64_t seed = 0, double box = 5.0);

struct BilipEstimate {
  double ball_radius = 0.0;
  int pairs = 0;
  /// min and max of d_H(f p, f q) / d_RT(p, q) over the sampled pairs.
  double lower = 0.0;
  double upper = 0.0;
};

/// Pairs of endpoints of random horizontal paths of length <= ball_radius from the
/// identity, so both points lie in the RT ball. Distances by the direct method; throws
/// NonConvergenceError when one is not certified.
BilipEstimate local_bilip_estimate(double ball_radius, int pairs, std::uint64_t seed = 0,
                                   const DirectOptions& opt = {});

nlohmann::json to_json(const PullbackReport& r);
nlohmann::json to_json(const HorizontalityReport& r);
nlohmann::json to_json(const BilipEstimate& r);

}  // namespace qclab
