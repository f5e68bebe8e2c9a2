#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qclab/obstruction.hpp"

using namespace qclab;

namespace {

LatticeSpec small_rt_lattice(double extent, double h) {
  LatticeSpec spec;
  spec.space = SpaceModel::roto_translation();
  spec.h = h;
  spec.step = default_steps(spec.space, h);
  for (int a = 0; a < 3; ++a) {
    const double half = a == 2 ? 2.0 : extent;
    spec.hi[a] = static_cast<int>(std::ceil(half / spec.step[a]));
    spec.lo[a] = -spec.hi[a];
  }
  return spec;
}

}  // namespace

TEST_SUITE("obstruction") {
  TEST_CASE("derived constants") {
    const DerivedConstants a = derive_constants({4, 3, 1, 1, 1, 1});
    CHECK(a.R1 == doctest::Approx(6.0));
    CHECK(a.t1 == doctest::Approx(7.0));
    CHECK(a.c0 == doctest::Approx(4.0));
    CHECK(a.c1 == doctest::Approx(8.0));
    const DerivedConstants b = derive_constants({4, 3, 1, 10, 1, 0.1});
    CHECK(b.R1 == doctest::Approx(10.0));
    CHECK(b.t1 == doctest::Approx(10.1));
    const DerivedConstants c = derive_constants({4, 3, 1, 1, 2, 1});
    CHECK(c.R1 == doctest::Approx(12.0));
    CHECK(c.t1 == doctest::Approx(26.0));
    CHECK(c.c1 == doctest::Approx(20.0));
  }

  TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(derive_constants({4, 4, 1, 1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(derive_constants({4, 3, 1, 1, 0.5, 1}), std::invalid_argument);
    CHECK_THROWS_AS(derive_constants({4, 3, 1, 1, 1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(derive_constants({1, 0.5, 1, 1, 1, 1}), std::invalid_argument);
  }

  TEST_CASE("tail closed form against quadrature and a hand value") {
    const ObstructionParams p{4, 3, 2, 4, 1, 1};
    const DerivedConstants c = derive_constants(p);
    // 2 * 8^3 * 4 * (8 / 6)^1
    CHECK(energy_tail_closed_form(p, c) == doctest::Approx(2.0 * 512.0 * 4.0 * 8.0 / 6.0));
    for (double N : {0.5, 2.0, 3.0, 3.9}) {
      const ObstructionParams q{4, N, 1.5, 2, 1.3, 0.7};
      const DerivedConstants d = derive_constants(q);
      CHECK(energy_tail_quadrature(q, d) == doctest::Approx(energy_tail_closed_form(q, d)).epsilon(0.01));
    }
  }

  TEST_CASE("affine fit") {
    std::vector<double> x, y;
    for (int i = 1; i <= 40; ++i) {
      x.push_back(i);
      y.push_back(2.0 * i + (i % 3));
    }
    const AffineBounds f = fit_affine_bounds(x, y);
    CHECK(f.L == doctest::Approx(2.0).epsilon(0.05));
    CHECK(f.max_violation <= 1e-12);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(y[i] <= f.L * x[i] + f.b + 1e-9);
      CHECK(y[i] >= x[i] / f.L - f.b - 1e-9);
    }
    // Shrinking maps use L = 1 / r3.
    std::vector<double> half;
    for (double v : x) half.push_back(0.5 * v);
    CHECK(fit_affine_bounds(x, half).L == doctest::Approx(2.0));
    CHECK_THROWS_AS(fit_affine_bounds(x, std::vector<double>(x.size(), 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(fit_affine_bounds({1.0}, {1.0}), std::invalid_argument);
  }

  TEST_CASE("floor map") {
    CHECK(floor_map(Point3d(1.5, 2.3, 7.0)).isApprox(Point3d(1.0, 2.0, 2.0 * std::numbers::pi)));
    CHECK(floor_map(Point3d(-0.5, 0.0, -0.1)).isApprox(Point3d(-1.0, 0.0, -2.0 * std::numbers::pi)));
  }

  TEST_CASE("nested samples") {
    const auto a = nested_samples(-9.0, -7.0, 4);
    const auto b = nested_samples(-14.0, -7.0, 4);
    CHECK(a.front() == -9.0);
    CHECK(a.back() == -7.0);
    CHECK(a.size() == 9);
    CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    const auto c = nested_samples(7.0, 9.5, 2);
    CHECK(c.back() == 9.5);
  }

  TEST_CASE("axis quasi-geodesics are geodesic") {
    for (const auto& s : {SpaceModel::heisenberg(), SpaceModel::roto_translation()}) {
      QuasiGeodesicOptions opt;
      opt.certificate_pairs = 12;
      const QuasiGeodesic q = axis_quasi_geodesic(s, 6, opt);
      CHECK(q.certificate.L == doctest::Approx(1.0).epsilon(1e-3));
      CHECK(q.certificate.b < 1e-3);
      CHECK((q(2.5) - Point3d(2.5, 0, 0)).norm() < 1e-6);
      CHECK_THROWS_AS(q(6.5), CoverageError);
    }
  }

  TEST_CASE("continua are nested, separated and carry an admissible density") {
    QuasiGeodesicOptions opt;
    opt.certificate_pairs = 8;
    const QuasiGeodesic sigma = axis_quasi_geodesic(SpaceModel::roto_translation(), 16, opt);
    const ObstructionParams p{4, 3, 2, 4, 1, 1};
    const DerivedConstants c = derive_constants(p);
    const LatticeGraph g(small_rt_lattice(20.0, 1.0));
    const ContinuumPair a = build_continua(sigma, g, c, 9);
    const ContinuumPair b = build_continua(sigma, g, c, 14);
    CHECK(std::includes(b.E.begin(), b.E.end(), a.E.begin(), a.E.end()));
    CHECK(std::includes(b.F.begin(), b.F.end(), a.F.begin(), a.F.end()));
    CHECK(b.separation <= a.separation);
    CHECK(a.separation >= p.b - a.slack);
    CHECK_THROWS_AS(build_continua(sigma, g, c, 7), std::invalid_argument);
    CHECK_THROWS_AS(build_continua(sigma, g, c, 17), CoverageError);

    const NodeId x0 = *g.nearest(Point3d::Zero());
    const Density rho = decay_density(g, x0, c);
    CHECK(rho.values[x0] == doctest::Approx(c.c0));
    const CurveFamily<LatticeGraph> fam{&g, b.E, b.F};
    CHECK(admissibility_check(fam, rho, 8, 1).min_integral >= 0.95);
    CHECK(length_lower_bound_check(fam, c, x0, 8, 1).min_ratio >= 0.95);
    const EnergyBound e = density_energy_bound(g, x0, rho, p, c);
    CHECK(e.numeric > 0.0);
    CHECK(e.jump_ratio == doctest::Approx(c.c1 * p.b / (4.0 * c.R1)));
  }

  TEST_CASE("decay density on a path graph") {
    std::vector<Edge> edges;
    for (int i = 0; i < 19; ++i) edges.push_back({i, i + 1, 1.0});
    const WeightedGraph g = WeightedGraph::from_edges(20, edges, std::vector<double>(20, 1.0));
    const DerivedConstants c = derive_constants({4, 3, 1, 1, 1, 1});
    const Density rho = decay_density(g, 0, c);
    CHECK(rho.values[5] == doctest::Approx(c.c0));
    CHECK(rho.values[6] == doctest::Approx(c.c1 / 6.0));
    CHECK(rho.values[19] == doctest::Approx(c.c1 / 19.0));
  }

  TEST_CASE("quasi-isometry estimate on a small box") {
    QIOptions opt;
    opt.h = 1.0;
    opt.seed = 4;
    const QIEstimate q = estimate_qi_constants(100, 12.0, opt);
    CHECK(std::isfinite(q.L_hat));
    CHECK(std::isfinite(q.b_hat));
    CHECK(q.L_hat >= 1.0);
    CHECK(q.max_violation <= 1e-9);
    for (std::size_t i = 0; i < q.d_E.size(); ++i) CHECK(q.d_RT[i] >= q.d_E[i] - 1e-9);
    CHECK(q.R_E == doctest::Approx(std::sqrt(2.0 + 4.0 * std::numbers::pi * std::numbers::pi)));
  }

  TEST_CASE("bounded loewner needs the roto-translation hypotheses") {
    const BoundedLoewnerReport r = bounded_loewner_check(SpaceModel::heisenberg(), {4, 3, 1, 1, 1, 1}, {1.0});
    CHECK_FALSE(r.hypothesis_met);
    CHECK(r.rows.empty());
  }
}
