#include "qclab/planar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qclab {

namespace {

constexpr double kTol = 1e-12;
constexpr double kPi = std::numbers::pi;

void check_lambda(double lambda) {
  if (!(lambda > 1.0 && lambda < 2.0)) throw std::invalid_argument("stretch needs lambda in (1, 2)");
}

Vector2d stretch(const Vector2d& z, double lambda) {
  const double r = z.norm();
  if (r == 0.0) return z;
  return z * std::pow(r, (lambda - 1.0) / (2.0 - lambda));
}

Vector2d unstretch(const Vector2d& w, double lambda) {
  const double r = w.norm();
  if (r == 0.0) return w;
  return w * std::pow(r, 1.0 - lambda);
}

}  // namespace

std::string_view to_string(PlanarExample e) {
  switch (e) {
    case PlanarExample::half_strip: return "half-strip";
    case PlanarExample::strip: return "strip";
    case PlanarExample::stretch: return "stretch";
    case PlanarExample::identity: return "identity";
  }
  return "?";
}

PlanarExample parse_planar_example(std::string_view name) {
  if (name == "half-strip") return PlanarExample::half_strip;
  if (name == "strip") return PlanarExample::strip;
  if (name == "stretch") return PlanarExample::stretch;
  if (name == "identity") return PlanarExample::identity;
  throw std::invalid_argument("unknown planar example '" + std::string(name) + "'");
}

PlanarDomain source_domain(PlanarExample e, double lambda) {
  switch (e) {
    case PlanarExample::half_strip:
      return {"half-strip", [](const Vector2d& z) { return z.x() >= -kTol && z.y() >= -kTol && z.y() <= kPi + kTol; }};
    case PlanarExample::strip:
      return {"strip", [](const Vector2d& z) { return z.y() >= -kTol && z.y() <= kPi + kTol; }};
    case PlanarExample::stretch:
      check_lambda(lambda);
      return {"strip", [](const Vector2d& z) { return std::abs(z.y()) <= 1.0 + kTol; }};
    case PlanarExample::identity:
      break;
  }
  return {"plane", [](const Vector2d& z) { return z.allFinite(); }};
}

PlanarDomain target_domain(PlanarExample e, double lambda) {
  switch (e) {
    case PlanarExample::half_strip:
      return {"half-plane minus disk", [](const Vector2d& w) { return w.y() >= -kTol && w.norm() >= 1.0 - kTol; }};
    case PlanarExample::strip:
      return {"punctured half-plane", [](const Vector2d& w) { return w.y() >= -kTol && w.norm() > 0.0; }};
    case PlanarExample::stretch:
      check_lambda(lambda);
      return {"stretched strip",
              [lambda](const Vector2d& w) { return std::abs(unstretch(w, lambda).y()) <= 1.0 + 1e-9; }};
    case PlanarExample::identity:
      break;
  }
  return {"plane", [](const Vector2d& w) { return w.allFinite(); }};
}

Vector2d planar_map(PlanarExample e, const Vector2d& z, double lambda) {
  if (!source_domain(e, lambda).contains(z)) throw std::invalid_argument("point outside the source domain");
  switch (e) {
    case PlanarExample::half_strip:
    case PlanarExample::strip:
      return std::exp(z.x()) * Vector2d(std::cos(z.y()), std::sin(z.y()));
    case PlanarExample::stretch:
      return stretch(z, lambda);
    case PlanarExample::identity:
      break;
  }
  return z;
}

DilatationEstimate dilatation_estimate(PlanarExample e, const Vector2d& z, const std::vector<double>& radii,
                                       int samples_per_circle, double lambda) {
  if (radii.empty()) throw std::invalid_argument("dilatation needs at least one radius");
  if (samples_per_circle < 4) throw std::invalid_argument("dilatation needs at least 4 samples per circle");
  const PlanarDomain dom = source_domain(e, lambda);
  const Vector2d fz = planar_map(e, z, lambda);
  DilatationEstimate d;
  d.point = z;
  d.radii = radii;
  for (double r : radii) {
    if (!(r > 0.0)) throw std::invalid_argument("radii must be positive");
    double lo = kInf;
    double hi = 0.0;
    for (int k = 0; k < samples_per_circle; ++k) {
      const double a = 2.0 * kPi * k / samples_per_circle;
      const Vector2d zp = z + r * Vector2d(std::cos(a), std::sin(a));
      if (!dom.contains(zp)) throw std::invalid_argument("circle leaves the source domain");
      const double s = (planar_map(e, zp, lambda) - fz).norm();
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    d.H.push_back(hi / lo);
  }
  std::vector<std::size_t> order(radii.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return radii[a] < radii[b]; });
  d.sup_estimate = d.H[order[0]];
  if (order.size() > 1) d.sup_estimate = std::max(d.sup_estimate, d.H[order[1]]);
  return d;
}

bool shape_contains(double lambda, double a, const Vector2d& w) {
  return (std::abs(w.x()) <= a && std::abs(w.y()) <= a) || std::abs(w.y()) <= a * std::pow(std::abs(w.x()), lambda - 1.0);
}

ShapeFit shape_inclusion_fit(double lambda, int samples, double x_max) {
  check_lambda(lambda);
  if (samples < 2) throw std::invalid_argument("shape fit needs at least 2 samples");
  if (!(x_max > 0.0)) throw std::invalid_argument("x_max must be positive");
  ShapeFit fit;
  fit.lambda = lambda;
  fit.samples = samples;
  const double smax = std::asinh(x_max);
  std::vector<Vector2d> images;
  for (int k = 0; k < samples; ++k) {
    const double x = std::sinh(-smax + 2.0 * smax * k / (samples - 1));
    const Vector2d w = stretch(Vector2d(x, k % 2 == 0 ? 1.0 : -1.0), lambda);
    images.push_back(w);
    // Least a admitting w: through the box, or through the cusp region.
    double need = std::max(std::abs(w.x()), std::abs(w.y()));
    if (w.x() != 0.0) need = std::min(need, std::abs(w.y()) / std::pow(std::abs(w.x()), lambda - 1.0));
    fit.threshold = std::max(fit.threshold, need);
  }
  fit.a = std::ceil(fit.threshold / 1e-3 - 1e-9) * 1e-3;
  fit.all_pass = std::all_of(images.begin(), images.end(), [&](const Vector2d& w) { return shape_contains(lambda, fit.a, w); });
  return fit;
}

double dyadic_area(const std::function<bool(const Vector2d&)>& inside, double r, int depth, int base) {
  if (!(r > 0.0) || depth < 0 || base < 1) throw std::invalid_argument("dyadic_area: bad arguments");
  double area = 0.0;
  std::function<void(const Vector2d&, double, int)> cell = [&](const Vector2d& lo, double side, int level) {
    const Vector2d mid = lo + Vector2d::Constant(0.5 * side);
    const bool c = inside(mid);
    if (level < depth) {
      const bool uniform = inside(lo) == c && inside(lo + Vector2d(side, 0.0)) == c &&
                           inside(lo + Vector2d(0.0, side)) == c && inside(lo + Vector2d(side, side)) == c;
      if (!uniform) {
        const double half = 0.5 * side;
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) cell(lo + Vector2d(i * half, j * half), half, level + 1);
        return;
      }
    }
    if (c) area += side * side;
  };
  const double side = 2.0 * r / base;
  for (int i = 0; i < base; ++i)
    for (int j = 0; j < base; ++j) cell(Vector2d(-r + i * side, -r + j * side), side, 0);
  return area;
}

GrowthFit stretched_strip_growth(double lambda, const std::vector<double>& radii, int depth) {
  check_lambda(lambda);
  const PlanarDomain y = target_domain(PlanarExample::stretch, lambda);
  std::vector<double> areas;
  for (double r : radii) {
    if (!(r > 0.0)) throw std::invalid_argument("radii must be positive");
    areas.push_back(dyadic_area([&](const Vector2d& w) { return w.norm() <= r && y.contains(w); }, r, depth));
  }
  GrowthFit fit = fit_growth(radii, std::move(areas));
  fit.method = "dyadic-midpoint";
  return fit;
}

std::vector<double> properness_witness(int count) {
  if (count < 1) throw std::invalid_argument("count must be positive");
  std::vector<double> out;
  for (int n = 1; n <= count; ++n) out.push_back(planar_map(PlanarExample::strip, Vector2d(-n, kPi / 2.0)).norm());
  return out;
}

nlohmann::json to_json(const DilatationEstimate& d) {
  return {{"point", {d.point.x(), d.point.y()}}, {"radii", d.radii}, {"H", d.H}, {"sup_estimate", d.sup_estimate}};
}

nlohmann::json to_json(const ShapeFit& s) {
  return {{"lambda", s.lambda}, {"samples", s.samples}, {"a", s.a}, {"threshold", s.threshold}, {"all_pass", s.all_pass}};
}

}  // namespace qclab
