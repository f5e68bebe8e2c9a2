#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qclab/planar.hpp"

using namespace qclab;

namespace {

// Area of the stretched strip in B(0, r) in polar form: the ray at angle phi and
// radius s lies in it iff |sin phi| <= s^(lambda - 2).
double polar_area(double lambda, double r) {
  const int m = 200000;
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    const double s = (i + 0.5) * r / m;
    sum += s * 4.0 * std::asin(std::min(1.0, std::pow(s, lambda - 2.0))) * r / m;
  }
  return sum;
}

}  // namespace

TEST_SUITE("planar") {
  TEST_CASE("exponential map values") {
    CHECK((planar_map(PlanarExample::half_strip, Vector2d(0, 0)) - Vector2d(1, 0)).norm() < 1e-15);
    CHECK((planar_map(PlanarExample::half_strip, Vector2d(0, std::numbers::pi)) - Vector2d(-1, 0)).norm() < 1e-15);
    CHECK_THROWS_AS(planar_map(PlanarExample::half_strip, Vector2d(-1, 1)), std::invalid_argument);
    CHECK_THROWS_AS(planar_map(PlanarExample::strip, Vector2d(0, 4)), std::invalid_argument);
    CHECK_THROWS_AS(planar_map(PlanarExample::stretch, Vector2d(0, 0), 2.0), std::invalid_argument);
    CHECK_THROWS_AS(parse_planar_example("disk"), std::invalid_argument);
  }

  TEST_CASE("images lie in the target domains") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
      const Vector2d hs(6.0 * u(rng), std::numbers::pi * u(rng));
      CHECK(target_domain(PlanarExample::half_strip).contains(planar_map(PlanarExample::half_strip, hs)));
      const Vector2d st(12.0 * u(rng) - 6.0, std::numbers::pi * u(rng));
      CHECK(target_domain(PlanarExample::strip).contains(planar_map(PlanarExample::strip, st)));
      const Vector2d sx(200.0 * u(rng) - 100.0, 2.0 * u(rng) - 1.0);
      CHECK(target_domain(PlanarExample::stretch, 1.5).contains(planar_map(PlanarExample::stretch, sx, 1.5)));
    }
    CHECK_FALSE(target_domain(PlanarExample::half_strip).contains(Vector2d(0.5, 0.5)));
    CHECK_FALSE(target_domain(PlanarExample::strip).contains(Vector2d(0, 0)));
    CHECK_FALSE(target_domain(PlanarExample::stretch, 1.5).contains(Vector2d(0, 50)));
  }

  TEST_CASE("radial law of the stretch") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double lambda : {1.1, 1.5, 1.9}) {
      for (int k = 0; k < 500; ++k) {
        const Vector2d z(50.0 * u(rng), u(rng));
        const double expected = std::pow(z.norm(), 1.0 / (2.0 - lambda));
        CHECK(std::abs(planar_map(PlanarExample::stretch, z, lambda).norm() - expected) <= 1e-12 * std::max(1.0, expected));
      }
    }
  }

  TEST_CASE("stretch tends to the identity as lambda tends to one") {
    const Vector2d z(3.0, 0.5);
    CHECK((planar_map(PlanarExample::stretch, z, 1.0 + 1e-12) - z).norm() < 1e-10);
  }

  TEST_CASE("exponential dilatation equals e^r") {
    // |e^(r e^(ia)) - 1| is largest at a = 0 and smallest at a = pi.
    const DilatationEstimate d = dilatation_estimate(PlanarExample::strip, Vector2d(0, 1), {1e-2, 1e-3});
    CHECK(d.H[0] == doctest::Approx(std::exp(1e-2)).epsilon(1e-9));
    CHECK(d.H[1] == doctest::Approx(std::exp(1e-3)).epsilon(1e-9));
    CHECK(d.H[1] <= 1.01);
    CHECK(d.H[1] <= d.H[0] * 1.01);
    CHECK(d.sup_estimate == doctest::Approx(d.H[0]));
  }

  TEST_CASE("identity dilatation is one") {
    const DilatationEstimate d = dilatation_estimate(PlanarExample::identity, Vector2d(3, -2), {1.0, 0.1, 1e-3});
    for (double h : d.H) CHECK(h == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("stretch dilatation is finite and stable under halving") {
    const DilatationEstimate a = dilatation_estimate(PlanarExample::stretch, Vector2d(1, 0), {0.1, 0.05}, 256, 1.5);
    const DilatationEstimate b = dilatation_estimate(PlanarExample::stretch, Vector2d(1, 0), {0.05, 0.025}, 256, 1.5);
    CHECK(std::isfinite(a.sup_estimate));
    CHECK(b.sup_estimate == doctest::Approx(a.sup_estimate).epsilon(0.05));
    // The differential of the stretch at (1, 0) scales radially by 1 / (2 - lambda) = 2.
    CHECK(b.H[1] == doctest::Approx(2.0).epsilon(0.02));
  }

  TEST_CASE("circles leaving the domain are rejected") {
    CHECK_THROWS_AS(dilatation_estimate(PlanarExample::half_strip, Vector2d(0, 1), {1e-2}), std::invalid_argument);
    CHECK_THROWS_AS(dilatation_estimate(PlanarExample::stretch, Vector2d(0, 0.9), {0.2}), std::invalid_argument);
  }

  TEST_CASE("shape inclusion fit") {
    const ShapeFit f = shape_inclusion_fit(1.5, 10000);
    CHECK(f.all_pass);
    CHECK(std::isfinite(f.a));
    CHECK(f.a > 0.0);
    CHECK(f.a - f.threshold < 1e-3 + 1e-12);
    const ShapeFit g = shape_inclusion_fit(1.5, 40000);
    CHECK(std::abs(g.a - f.a) <= 1e-3 + 1e-12);
    // Points on the real axis pass for any a.
    CHECK(shape_contains(1.5, 0.0, Vector2d(123.0, 0.0)));
    CHECK_FALSE(shape_contains(1.5, 1.0, Vector2d(0.0, 2.0)));
  }

  TEST_CASE("dyadic area of a disk") {
    const double area = dyadic_area([](const Vector2d& w) { return w.norm() <= 1.0; }, 1.0, 12);
    CHECK(area == doctest::Approx(std::numbers::pi).epsilon(1e-4));
  }

  TEST_CASE("stretched strip area against the polar integral") {
    const GrowthFit fit = stretched_strip_growth(1.5, {10.0, 20.0, 40.0, 80.0});
    for (std::size_t i = 0; i < fit.radii.size(); ++i)
      CHECK(fit.volumes[i] == doctest::Approx(polar_area(1.5, fit.radii[i])).epsilon(1e-3));
    for (std::size_t i = 1; i < fit.volumes.size(); ++i) CHECK(fit.volumes[i] > fit.volumes[i - 1]);
    CHECK(fit.exponent == doctest::Approx(1.5).epsilon(0.1 / 1.5));
  }

  TEST_CASE("non-properness witness") {
    const auto d = properness_witness(10);
    for (std::size_t i = 1; i < d.size(); ++i) CHECK(d[i] < d[i - 1]);
    CHECK(d.back() == doctest::Approx(std::exp(-10.0)).epsilon(1e-12));
    CHECK_FALSE(target_domain(PlanarExample::strip).contains(Vector2d(0, 0)));
  }
}
