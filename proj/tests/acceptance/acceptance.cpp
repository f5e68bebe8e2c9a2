#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "modulus_oracle.hpp"
#include "qclab/cli.hpp"
#include "qclab/contacto.hpp"
#include "qclab/geodesics.hpp"
#include "qclab/modulus.hpp"
#include "qclab/obstruction.hpp"
#include "qclab/planar.hpp"
#include "qclab/volume.hpp"

using namespace qclab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  // Stage time when the work ran inside a shared computation.
  double seconds = -1.0;
};

int failures = 0;

void report(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.seconds >= 0.0) s = o.seconds;
  const bool in_time = s <= budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("criterion %2d %-28s %s  %s  [%.1f s of %.0f s]\n", id, name.c_str(), pass ? "PASS" : "FAIL",
              o.detail.c_str(), s, budget_s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

// Criteria 7, 8 and 9 share one run of the experiment.
const ObstructionReport& experiment() {
  static const ObstructionReport rep = [] {
    ObstructionConfig cfg;
    cfg.log = [](const std::string& s) { std::cerr << "  obstruction: " << s << '\n'; };
    return run_obstruction_experiment(cfg);
  }();
  return rep;
}

}  // namespace

int main() {
  report(1, "contactomorphism identity", 5, [] {
    const PullbackReport r = pullback_check(10000, 1);
    return Outcome{r.max_error <= 1e-10 && r.max_error_fd <= 1e-5,
                   "analytic " + fmt("%.2e", r.max_error) + ", finite-difference " + fmt("%.2e", r.max_error_fd)};
  });

  report(2, "unit jacobian", 1, [] {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    int exact = 0;
    for (int k = 0; k < 10000; ++k)
      if (left_translation_jacobian(SpaceModel::roto_translation(), Point3d(u(rng), u(rng), u(rng))) == 1.0) ++exact;
    return Outcome{exact == 10000, std::to_string(exact) + "/10000 exactly 1"};
  });

  report(3, "axis distances", 60, [] {
    const auto h1 = SpaceModel::heisenberg();
    const auto rt = SpaceModel::roto_translation();
    const Point3d o = Point3d::Zero();
    const double hd = cc_distance_direct(h1, o, Point3d(1, 0, 0)).value;
    const double hg = cc_distance_graph(h1, o, Point3d(1, 0, 0), 1.0 / 32.0).value;
    const double rd = cc_distance_direct(rt, o, Point3d(0, 0, 1)).value;
    const double rg = cc_distance_graph(rt, o, Point3d(0, 0, 1), 1.0 / 32.0).value;
    const bool ok = within(hd, 1, 0.02) && within(hg, 1, 0.02) && within(rd, 1, 0.02) && within(rg, 1, 0.02);
    return Outcome{ok, "H1 direct " + fmt("%.4f", hd) + " graph " + fmt("%.4f", hg) + "; RT direct " + fmt("%.4f", rd) +
                           " graph " + fmt("%.4f", rg)};
  });

  report(4, "volume exponents", 900, [] {
    // Default resolution: h = smallest radius / 6 on one lattice per fit.
    const GrowthFit h = growth_fit_fixed(SpaceModel::heisenberg(), log_spaced(0.5, 4.0, 5), 0.5 / 6.0);
    const GrowthFit large = growth_fit_fixed(SpaceModel::roto_translation(), log_spaced(8.0, 32.0, 5), 8.0 / 6.0);
    const GrowthFit small = growth_fit_fixed(SpaceModel::roto_translation(), log_spaced(0.1, 0.5, 5), 0.1 / 6.0);
    const bool ok = within(h.exponent, 4, 0.3) && within(large.exponent, 3, 0.4) && within(small.exponent, 4, 0.4);
    return Outcome{ok, "H1 " + fmt("%.3f", h.exponent) + ", RT large " + fmt("%.3f", large.exponent) + ", RT small " +
                           fmt("%.3f", small.exponent)};
  });

  report(5, "annulus modulus oracle", 120, [] {
    const double oracle_value = 2.0 * std::numbers::pi / std::log(2.0);
    const PlanarGraph g = build_annulus_graph(1.0, 2.0, 0.05);
    const CurveFamily<WeightedGraph> fam{&g.graph, g.inner, g.outer};
    const Density rho = annulus_extremal_density(g, 1.0, 2.0);
    const double adm = admissibility_check(fam, rho, 20, 1).min_integral;
    const double en = energy(g.graph, rho, 2.0);
    const bool oracle_ok = within(adm, 1.0, 0.03) && within(en / oracle_value, 1.0, 0.03);
    const ModulusResult r = q_modulus(fam, 2.0);
    const double mid = 0.5 * (r.lower + r.upper);
    const bool ok = oracle_ok && r.lower <= oracle_value && r.upper >= oracle_value && r.relative_gap <= 0.10 &&
                    within(mid / oracle_value, 1.0, 0.05);
    return Outcome{ok, "[" + fmt("%.3f", r.lower) + ", " + fmt("%.3f", r.upper) + "] vs " + fmt("%.3f", oracle_value) +
                           ", gap " + fmt("%.3f", r.relative_gap) + ", oracle density energy " + fmt("%.3f", en)};
  });

  report(6, "brute-force equivalence", 60, [] {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> len(0.5, 2.0), coin(0.0, 1.0);
    int tested = 0, agree = 0;
    double worst = 0.0;
    for (int trial = 0; tested < 24 && trial < 400; ++trial) {
      const int n = std::uniform_int_distribution<int>(5, 12)(rng);
      std::vector<Edge> edges;
      for (int v = 1; v < n; ++v) edges.push_back({std::uniform_int_distribution<int>(0, v - 1)(rng), v, len(rng)});
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (coin(rng) < 0.2) edges.push_back({i, j, len(rng)});
      std::vector<double> mu(n);
      for (auto& m : mu) m = len(rng);
      const WeightedGraph g = WeightedGraph::from_edges(n, edges, mu);
      const std::vector<NodeId> E{0}, F{n - 1};
      const auto rows = oracle::path_rows(g, E, F);
      if (rows.empty() || rows.size() > 3000) continue;
      ++tested;
      const double Q = tested % 2 == 0 ? 2.0 : 3.0;
      const double exact = oracle::modulus(rows, g.node_measures(), Q);
      ModulusOptions opt;
      opt.tol = 0.005;
      opt.max_outer = 2000;
      const double got = q_modulus(CurveFamily<WeightedGraph>{&g, E, F}, Q, opt).upper;
      const double rel = std::abs(got - exact) / exact;
      worst = std::max(worst, rel);
      if (rel <= 0.01) ++agree;
    }
    return Outcome{tested >= 20 && agree == tested,
                   std::to_string(agree) + "/" + std::to_string(tested) + " within 1%, worst " + fmt("%.2e", worst)};
  });

  report(7, "admissibility of density", 600, [] {
    const ObstructionReport& r = experiment();
    if (!r.completed) return Outcome{false, "experiment failed: " + r.error};
    double adm = kInf, len = kInf;
    for (const auto& row : r.source) {
      adm = std::min(adm, row.admissibility_min);
      len = std::min(len, row.length_ratio_min);
    }
    return Outcome{adm >= 0.95 && len >= 0.95,
                   "min integral " + fmt("%.3f", adm) + ", min length ratio " + fmt("%.3f", len) + " over " +
                       std::to_string(r.source.size()) + " indices",
                   r.seconds_sigma + r.seconds_source};
  });

  report(8, "bounded modulus in RT", 1200, [] {
    const ObstructionReport& r = experiment();
    if (!r.completed) return Outcome{false, "experiment failed: " + r.error};
    double worst = 0.0;
    for (const auto& row : r.source) worst = std::max(worst, row.modulus_upper);
    const bool bounded = worst <= r.energy.numeric * 1.10;
    const double tail_gap = std::abs(r.energy.tail_closed_form - r.energy.tail_quadrature) / r.energy.tail_closed_form;
    return Outcome{bounded && tail_gap <= 0.01, "max upper " + fmt("%.4g", worst) + " vs energy " +
                                                    fmt("%.4g", r.energy.numeric) + ", tail mismatch " +
                                                    fmt("%.2e", tail_gap),
                   r.seconds_sigma + r.seconds_source};
  });

  report(9, "image blow-up trend", 1200, [] {
    const ObstructionReport& r = experiment();
    if (!r.completed) return Outcome{false, "experiment failed: " + r.error};
    bool grow = true, sep = true, lower = true;
    double min_growth = kInf;
    for (std::size_t i = 1; i < r.image.size(); ++i) {
      const auto& a = r.image[i - 1];
      const auto& b = r.image[i];
      const double g = std::min(b.diam_E / a.diam_E, b.diam_F / a.diam_F);
      min_growth = std::min(min_growth, g);
      if (!(g >= 1.3)) grow = false;
      if (!(b.separation <= r.image.front().separation + 1e-12)) sep = false;
      if (!(b.modulus_lower >= a.modulus_lower)) lower = false;
    }
    std::string lows;
    for (const auto& row : r.image) lows += (lows.empty() ? "" : " ") + fmt("%.4g", row.modulus_lower);
    return Outcome{r.image.size() >= 2 && grow && sep && lower,
                   "min diameter growth " + fmt("%.2f", min_growth) + ", lower bounds " + lows,
                   r.seconds_sigma + r.seconds_image};
  });

  report(10, "loewner growth in H1", 600, [] {
    const auto s = loewner_series(SpaceModel::heisenberg(), 4.0, {1.0, 0.5, 0.25}, 1.0);
    std::vector<double> v;
    for (const auto& x : s) v.push_back(0.5 * (x.modulus.lower + x.modulus.upper));
    const double d1 = v[1] - v[0], d2 = v[2] - v[1];
    const bool ok = d1 > 0.0 && d2 > 0.0 && d2 / d1 >= 1.0 / 3.0 && d2 / d1 <= 3.0;
    return Outcome{ok, "estimates " + fmt("%.4g", v[0]) + " " + fmt("%.4g", v[1]) + " " + fmt("%.4g", v[2]) +
                           ", increment ratio " + fmt("%.3f", d2 / d1)};
  });

  report(11, "quasi-isometry fit", 600, [] {
    QIOptions opt;
    opt.seed = 11;
    const QIEstimate q = estimate_qi_constants(1000, 50.0, opt);
    const bool ok = std::isfinite(q.L_hat) && std::isfinite(q.b_hat) && q.max_violation <= 0.0 &&
                    q.L_change <= 0.25 && q.b_change <= 0.25;
    return Outcome{ok, "L " + fmt("%.3f", q.L_hat) + ", b " + fmt("%.3f", q.b_hat) + ", resample change L " +
                           fmt("%.3f", q.L_change) + " b " + fmt("%.3f", q.b_change)};
  });

  report(12, "planar examples", 120, [] {
    const double hexp = dilatation_estimate(PlanarExample::strip, Vector2d(0, 1), {1e-3}).H[0];
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double radial = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const Vector2d z(100.0 * u(rng), u(rng));
      const double want = std::pow(z.norm(), 1.0 / (2.0 - 1.5));
      radial = std::max(radial, std::abs(planar_map(PlanarExample::stretch, z, 1.5).norm() - want) / std::max(1.0, want));
    }
    const ShapeFit shape = shape_inclusion_fit(1.5, 10000);
    const GrowthFit growth = stretched_strip_growth(1.5, {10.0, 20.0, 40.0, 80.0});
    const bool ok = hexp <= 1.01 && radial <= 1e-12 && shape.all_pass && within(growth.exponent, 1.5, 0.1);
    return Outcome{ok, "exp H " + fmt("%.5f", hexp) + ", radial " + fmt("%.1e", radial) + ", shape a " +
                           fmt("%.3f", shape.a) + ", strip exponent " + fmt("%.3f", growth.exponent)};
  });

  report(13, "determinism", 300, [] {
    std::vector<RunConfig> configs(3);
    configs[0].command = "contacto-check";
    configs[0].samples = 2000;
    configs[0].seed = 13;
    configs[1].command = "distance";
    configs[1].space = SpaceId::roto_translation;
    configs[1].to = Point3d(1.0, 1.0, 0.5);
    configs[1].seed = 13;
    configs[2].command = "qi-estimate";
    configs[2].samples = 200;
    configs[2].box = 20.0;
    configs[2].seed = 13;
    int same = 0;
    for (const auto& c : configs)
      if (payload(dispatch(c)).dump() == payload(dispatch(c)).dump()) ++same;
    return Outcome{same == 3, std::to_string(same) + "/3 payloads byte-identical"};
  });

  return failures == 0 ? 0 : 1;
}
