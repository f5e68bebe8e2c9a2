#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qclab/volume.hpp"

using namespace qclab;

TEST_SUITE("volume") {
  TEST_CASE("fit recovers an exact power law") {
    const std::vector<double> r = {1.0, 2.0, 4.0, 8.0};
    std::vector<double> v;
    for (double x : r) v.push_back(3.0 * std::pow(x, 2.5));
    const GrowthFit fit = fit_growth(r, v);
    CHECK(fit.exponent == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(std::exp(fit.intercept) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit.residual < 1e-12);
  }

  TEST_CASE("fit rejects degenerate input") {
    CHECK_THROWS(fit_growth({1.0, 2.0}, {1.0, 8.0}));
    CHECK_THROWS(fit_growth({1.0, 2.0, 3.0}, {1.0, 2.0}));
    CHECK_THROWS(fit_growth({1.0, 2.0, 3.0}, {1.0, 0.0, 2.0}));
    CHECK_THROWS(fit_growth({1.0, -2.0, 3.0}, {1.0, 1.0, 2.0}));
  }

  TEST_CASE("log spacing") {
    const auto r = log_spaced(0.5, 4.0, 4);
    REQUIRE(r.size() == 4);
    CHECK(r.front() == doctest::Approx(0.5));
    CHECK(r.back() == doctest::Approx(4.0));
    CHECK(r[1] / r[0] == doctest::Approx(r[3] / r[2]));
  }

  TEST_CASE("euclidean balls grow cubically") {
    const GrowthFit fit = growth_fit_fixed(SpaceModel::euclidean(), {2.0, 3.0, 4.0, 6.0}, 0.25);
    CHECK(fit.exponent == doctest::Approx(3.0).epsilon(0.05));
    // Volume of the largest ball against 4/3 pi r^3 (graph balls are slightly polyhedral).
    CHECK(fit.volumes.back() == doctest::Approx(4.0 / 3.0 * std::numbers::pi * 216.0).epsilon(0.15));
  }

  TEST_CASE("ball volumes are monotone in the radius") {
    const GrowthFit fit = growth_fit_fixed(SpaceModel::heisenberg(), {0.5, 0.75, 1.0}, 0.0625);
    for (std::size_t i = 1; i < fit.volumes.size(); ++i) CHECK(fit.volumes[i] > fit.volumes[i - 1]);
  }

  TEST_CASE("heisenberg balls scale with exponent four") {
    const GrowthFit fit = growth_fit_scaled(SpaceModel::heisenberg(), {0.5, 1.0, 2.0}, 1.0 / 8.0);
    CHECK(fit.exponent == doctest::Approx(4.0).epsilon(0.075));
  }

  TEST_CASE("small roto-translation balls grow quartically on a widened box") {
    // Snapped moves reach further sideways than r^2 / 4, so the box margin has to grow.
    const GrowthFit fit = growth_fit_fixed(SpaceModel::roto_translation(), {0.1, 0.2, 0.3}, 0.02);
    CHECK(fit.exponent == doctest::Approx(4.0).epsilon(0.1));
  }

  TEST_CASE("csv carries units") {
    const GrowthFit fit = fit_growth({1.0, 2.0, 4.0}, {1.0, 8.0, 64.0});
    const std::string csv = to_csv(fit);
    CHECK(csv.rfind("radius", 0) == 0);
    CHECK(csv.find('[') != std::string::npos);
  }
}
