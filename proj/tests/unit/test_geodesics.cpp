#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qclab/geodesics.hpp"

using namespace qclab;

TEST_SUITE("geodesics") {
  TEST_CASE("heisenberg axis distances by the direct method") {
    const auto h = SpaceModel::heisenberg();
    CHECK(cc_distance_direct(h, Point3d::Zero(), Point3d(1, 0, 0)).value == doctest::Approx(1.0).epsilon(1e-3));
    // The vertical distance is the perimeter of a circle enclosing area |t| / 4.
    const DistanceResult v = cc_distance_direct(h, Point3d::Zero(), Point3d(0, 0, 1));
    CHECK(v.converged);
    CHECK(v.value == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(0.02));
  }

  TEST_CASE("roto-translation axis distances by the direct method") {
    const auto rt = SpaceModel::roto_translation();
    CHECK(cc_distance_direct(rt, Point3d::Zero(), Point3d(0, 0, 1)).value == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(cc_distance_direct(rt, Point3d::Zero(), Point3d(3, 0, 0)).value == doctest::Approx(3.0).epsilon(1e-3));
    // Reverse driving along the axis.
    CHECK(cc_distance_direct(rt, Point3d(5, 0, 0), Point3d(-7, 0, 0)).value == doctest::Approx(12.0).epsilon(1e-3));
  }

  TEST_CASE("direct values sit between the projection bound and the explicit path") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (const auto& s : {SpaceModel::heisenberg(), SpaceModel::roto_translation()}) {
      for (int k = 0; k < 6; ++k) {
        const Point3d p(u(rng), u(rng), u(rng)), q(u(rng), u(rng), u(rng));
        const DistanceResult d = cc_distance_direct(s, p, q);
        REQUIRE(d.converged);
        CHECK(d.value <= explicit_upper_bound(s, p, q) + 1e-9);
        const Point3d rel = group_mul<double>(s, group_inverse<double>(s, p), q);
        // Horizontal speed bounds the planar motion in H1 and the rotation in RT.
        const double lower = s.id == SpaceId::heisenberg ? rel.head<2>().norm() : std::abs(rel.z());
        CHECK(d.value >= lower - 1e-6);
        CHECK((flow_endpoint(s, d.path) - q).norm() < 1e-3);
      }
    }
  }

  TEST_CASE("distances are left invariant") {
    const auto s = SpaceModel::roto_translation();
    const Point3d p(0.2, 0.1, -0.3), q(1.0, -0.4, 0.5), g(3.0, -2.0, 1.7);
    const double a = cc_distance_direct(s, p, q).value;
    const double b = cc_distance_direct(s, group_mul<double>(s, g, p), group_mul<double>(s, g, q)).value;
    CHECK(a == doctest::Approx(b).epsilon(1e-4));
  }

  TEST_CASE("round values are nonincreasing") {
    const DistanceResult d = cc_distance_direct(SpaceModel::heisenberg(), Point3d::Zero(), Point3d(0.5, 0.2, 0.7));
    for (std::size_t i = 1; i < d.round_values.size(); ++i) CHECK(d.round_values[i] <= d.round_values[i - 1]);
  }

  TEST_CASE("graph distances on the axes") {
    CHECK(cc_distance_graph(SpaceModel::heisenberg(), Point3d::Zero(), Point3d(1, 0, 0), 1.0 / 16).value ==
          doctest::Approx(1.0).epsilon(0.02));
    CHECK(cc_distance_graph(SpaceModel::roto_translation(), Point3d::Zero(), Point3d(0, 0, 1), 1.0 / 16).value ==
          doctest::Approx(1.0).epsilon(0.02));
    CHECK(cc_distance_graph(SpaceModel::euclidean(), Point3d::Zero(), Point3d(1, 1, 1), 0.25).value ==
          doctest::Approx(std::sqrt(3.0)).epsilon(0.02));
  }

  TEST_CASE("bad inputs are rejected") {
    const Point3d nan(std::nan(""), 0, 0);
    CHECK_THROWS_AS(cc_distance_direct(SpaceModel::heisenberg(), nan, Point3d::Zero()), std::invalid_argument);
    CHECK(cc_distance_direct(SpaceModel::heisenberg(), Point3d(1, 2, 3), Point3d(1, 2, 3)).value == 0.0);
  }
}
