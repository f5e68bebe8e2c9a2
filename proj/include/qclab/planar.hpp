#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "qclab/volume.hpp"

namespace qclab {

using Vector2d = Eigen::Vector2d;

/// The planar examples:
///   half_strip:  e^z from {x >= 0, 0 <= y <= pi} onto {y >= 0, |z| >= 1}
///   strip:       e^z from {0 <= y <= pi} onto the closed upper half-plane minus 0
///   stretch:     z |z|^((lambda - 1) / (2 - lambda)) from {|y| <= 1} onto its image
///   identity:    the plane onto itself
enum class PlanarExample { half_strip, strip, stretch, identity };

std::string_view to_string(PlanarExample e);
/// Accepts "half-strip", "strip", "stretch", "identity".
PlanarExample parse_planar_example(std::string_view name);

struct PlanarDomain {
  std::string tag;
  std::function<bool(const Vector2d&)> contains;
};

/// Closed domains are tested with an absolute tolerance of 1e-12.
PlanarDomain source_domain(PlanarExample e, double lambda = 1.5);
PlanarDomain target_domain(PlanarExample e, double lambda = 1.5);

/// Throws std::invalid_argument when z is outside the source domain or, for the
/// stretch, lambda is outside (1, 2).
Vector2d planar_map(PlanarExample e, const Vector2d& z, double lambda = 1.5);

struct DilatationEstimate {
  Vector2d point = Vector2d::Zero();
  std::vector<double> radii;
  /// max |f(z') - f(z)| / min |f(z') - f(z)| over |z' - z| = r.
  std::vector<double> H;
  /// Largest H over the two smallest radii.
  double sup_estimate = 0.0;
};

/// Throws std::invalid_argument when a sampled circle leaves the source domain.
DilatationEstimate dilatation_estimate(PlanarExample e, const Vector2d& z, const std::vector<double>& radii,
                                       int samples_per_circle = 256, double lambda = 1.5);

struct ShapeFit {
  double lambda = 0.0;
  int samples = 0;
  /// Least a on the 1e-3 grid for which every sample passes.
  double a = 0.0;
  /// Least a over the reals.
  double threshold = 0.0;
  bool all_pass = false;
};

/// Images of boundary samples (x, +-1), x = sinh(s) with s uniform on
/// [-asinh(x_max), asinh(x_max)], tested against [-a, a]^2 u {|y| <= a |x|^(lambda - 1)}.
ShapeFit shape_inclusion_fit(double lambda, int samples, double x_max = 1e6);

/// True when w lies in [-a, a]^2 or |w.y| <= a |w.x|^(lambda - 1).
bool shape_contains(double lambda, double a, const Vector2d& w);

/// Area of D n [-r, r]^2 by the midpoint rule on dyadic cells: cells whose corners and
/// center agree are taken whole, the rest split up to `depth` levels.
double dyadic_area(const std::function<bool(const Vector2d&)>& inside, double r, int depth = 12, int base = 16);

/// Areas of the stretched strip inside Euclidean balls B(0, r) and their log-log fit.
GrowthFit stretched_strip_growth(double lambda, const std::vector<double>& radii, int depth = 12);

/// |f(z_n)| for z_n = (-n, pi / 2), n = 1..count, in the strip example: the images tend to
/// the missing origin.
std::vector<double> properness_witness(int count);

nlohmann::json to_json(const DilatationEstimate& d);
nlohmann::json to_json(const ShapeFit& s);

}  // namespace qclab
