#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qclab/spaces.hpp"

using namespace qclab;

namespace {

const SpaceModel kSpaces[] = {SpaceModel::heisenberg(), SpaceModel::roto_translation(), SpaceModel::euclidean()};

Point3d random_point(std::mt19937_64& rng, double box = 3.0) {
  std::uniform_real_distribution<double> u(-box, box);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace

TEST_SUITE("spaces") {
  TEST_CASE("group law is associative with two-sided inverses") {
    std::mt19937_64 rng(1);
    for (const auto& s : kSpaces) {
      for (int k = 0; k < 200; ++k) {
        const Point3d a = random_point(rng), b = random_point(rng), c = random_point(rng);
        const Point3d lhs = group_mul<double>(s, group_mul<double>(s, a, b), c);
        const Point3d rhs = group_mul<double>(s, a, group_mul<double>(s, b, c));
        CHECK((lhs - rhs).norm() < 1e-11);
        CHECK(group_mul<double>(s, a, group_inverse<double>(s, a)).norm() < 1e-12);
        CHECK(group_mul<double>(s, group_inverse<double>(s, a), a).norm() < 1e-12);
      }
    }
  }

  TEST_CASE("heisenberg product by hand") {
    const Point3d p = group_mul<double>(SpaceModel::heisenberg(), Point3d(1, 2, 3), Point3d(4, 5, 6));
    // t = 3 + 6 + 2*2*4 - 2*1*5
    CHECK(p.isApprox(Point3d(5, 7, 15.0)));
    // X(p) is the derivative of s -> p (s, 0, 0) at s = 0.
    const Point3d q(0.3, -1.2, 0.4);
    const Point3d moved = group_mul<double>(SpaceModel::heisenberg(), q, Point3d(1e-6, 0, 0));
    CHECK(((moved - q) / 1e-6 - frame_eval(SpaceModel::heisenberg(), q).X.components).norm() < 1e-9);
  }

  TEST_CASE("roto-translation product by hand") {
    const double th = std::numbers::pi / 2;
    const Point3d p = group_mul<double>(SpaceModel::roto_translation(), Point3d(1, 0, th), Point3d(1, 0, 0.5));
    CHECK(p.x() == doctest::Approx(1.0));
    CHECK(p.y() == doctest::Approx(1.0));
    CHECK(p.z() == doctest::Approx(th + 0.5));
  }

  TEST_CASE("contact forms annihilate the frame") {
    std::mt19937_64 rng(2);
    for (const auto& s : {SpaceModel::heisenberg(), SpaceModel::roto_translation()}) {
      for (int k = 0; k < 100; ++k) {
        const Point3d p = random_point(rng);
        const Frame f = frame_eval(s, p);
        CHECK(std::abs(contact_form_eval(s, p, f.X)) < 1e-14);
        CHECK(std::abs(contact_form_eval(s, p, f.Y)) < 1e-14);
      }
    }
    CHECK_THROWS(contact_form_eval(SpaceModel::euclidean(), Point3d::Zero(), TangentVector{}));
  }

  TEST_CASE("brackets are transverse") {
    // [X, Y] = -4 d/dt in H1, and sin th d/dx - cos th d/dy in RT.
    const Point3d p(0.3, -0.7, 0.9);
    const TangentVector bh = bracket_numeric(SpaceModel::heisenberg(), p, 1e-4);
    CHECK(std::abs(bh.components.z()) == doctest::Approx(4.0).epsilon(1e-3));
    CHECK(std::abs(bh.components.x()) < 1e-3);
    const TangentVector br = bracket_numeric(SpaceModel::roto_translation(), p, 1e-4);
    const Vector3d expected(std::sin(p.z()), -std::cos(p.z()), 0.0);
    CHECK(std::min((br.components - expected).norm(), (br.components + expected).norm()) < 1e-3);
    CHECK(std::abs(contact_form_eval(SpaceModel::roto_translation(), p, br)) == doctest::Approx(1.0).epsilon(1e-3));
  }

  TEST_CASE("left translations preserve the frame and have unit jacobian") {
    std::mt19937_64 rng(3);
    for (const auto& s : kSpaces) {
      for (int k = 0; k < 100; ++k) {
        const Point3d g = random_point(rng), p = random_point(rng);
        const Matrix3d d = left_translation_differential(s, g);
        const Matrix3d fp = frame_matrix<double>(s, p);
        const Matrix3d fgp = frame_matrix<double>(s, group_mul<double>(s, g, p));
        CHECK((d * fp - fgp).norm() < 1e-12);
        CHECK(left_translation_jacobian(s, g) == 1.0);
        CHECK(left_translation_jacobian_numeric(s, g) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("exact flow matches RK4 integration") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (const auto& s : kSpaces) {
      ControlPath path;
      path.start = random_point(rng);
      for (int i = 0; i < 5; ++i) path.segments.push_back({Vector3d(u(rng), u(rng), u(rng)), 0.3 + 0.1 * i});
      const Point3d exact = flow_endpoint(s, path);
      const Point3d rk = horizontal_flow(s, path, 1e-3).back();
      CHECK((exact - rk).norm() < 1e-9);
      CHECK((flow_point_at(s, path, path.total_time()) - exact).norm() < 1e-12);
    }
  }

  TEST_CASE("path length is the control norm times duration") {
    ControlPath path;
    path.segments = {{Vector3d(3, 4, 0), 2.0}, {Vector3d(0, 1, 0), 0.5}};
    CHECK(path.length(SpaceModel::heisenberg()) == doctest::Approx(10.5));
    CHECK(path.total_time() == doctest::Approx(2.5));
  }

  TEST_CASE("space names parse") {
    CHECK(parse_space("heis") == SpaceId::heisenberg);
    CHECK(parse_space("rt") == SpaceId::roto_translation);
    CHECK(parse_space("e3") == SpaceId::euclidean);
    CHECK_THROWS_AS(parse_space("sol"), std::invalid_argument);
  }
}
