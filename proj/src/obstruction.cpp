#include "qclab/obstruction.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "qclab/contacto.hpp"

namespace qclab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

Point3d chart_rt(const Point3d& p) {
  const double c = std::cos(p.z());
  const double s = std::sin(p.z());
  return {c * p.x() + s * p.y(), -s * p.x() + c * p.y(), p.z()};
}

template <class Graph>
double path_length(const Graph& g, const std::vector<NodeId>& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += g.edge_length(path[i - 1], path[i]);
  return len;
}

std::vector<NodeId> nodes_along(const LatticeGraph& g, const std::function<Point3d(double)>& point,
                                const std::vector<double>& params) {
  std::vector<NodeId> out;
  out.reserve(params.size());
  for (double s : params) {
    const auto v = g.nearest(point(s));
    if (!v) throw CoverageError("continuum sample outside the lattice");
    out.push_back(*v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double set_distance(const LatticeGraph& g, const std::vector<NodeId>& from, const std::vector<NodeId>& to) {
  const ShortestPaths sp = dijkstra(g, std::span<const NodeId>(from));
  double d = kInf;
  for (NodeId v : to) d = std::min(d, sp.dist[v]);
  return d;
}

bool contains_all(const std::vector<NodeId>& big, const std::vector<NodeId>& small) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

int samples_per_unit(double h, double speed) {
  return std::max(1, static_cast<int>(std::ceil(4.0 * std::max(1.0, speed) / h - 1e-9)));
}

LatticeSpec box_spec(const SpaceModel& space, double h, const Vector3d& lo, const Vector3d& hi, bool sheared) {
  LatticeSpec spec;
  spec.space = space;
  spec.h = h;
  spec.step = default_steps(space, h);
  spec.sheared = sheared;
  for (int a = 0; a < 3; ++a) {
    spec.lo[a] = static_cast<int>(std::floor(lo[a] / spec.step[a] + 1e-9)) - 1;
    spec.hi[a] = static_cast<int>(std::ceil(hi[a] / spec.step[a] - 1e-9)) + 1;
  }
  return spec;
}

void check_cap(const LatticeSpec& spec, std::int64_t cap, const char* what) {
  const Index3 e = spec.hi - spec.lo + Index3::Ones();
  const std::int64_t n = std::int64_t{e[0]} * e[1] * e[2];
  if (n > cap) throw ResourceCapError(std::string(what) + " lattice would have " + std::to_string(n) + " nodes");
}

// Roto-translation lattice covering sigma([-extent, extent]) on the x-axis.
LatticeSpec source_lattice(double extent, const ObstructionConfig& cfg) {
  const double a = extent + cfg.source_margin;
  const double w = cfg.theta_halfwidth;
  LatticeSpec spec = box_spec(SpaceModel::roto_translation(), cfg.source_h, Vector3d(-a, -a, -w), Vector3d(a, a, w), false);
  check_cap(spec, cfg.max_nodes, "source");
  return spec;
}

}  // namespace

void validate(const ObstructionParams& p) {
  if (!(p.Q > 1.0)) throw std::invalid_argument("obstruction needs Q > 1");
  if (!(p.N < p.Q)) throw std::invalid_argument("obstruction needs N < Q");
  if (!(p.C0 > 0.0) || !(p.R0 > 0.0)) throw std::invalid_argument("obstruction needs C0, R0 > 0");
  if (!(p.L >= 1.0)) throw std::invalid_argument("obstruction needs L >= 1");
  if (!(p.b > 0.0)) throw std::invalid_argument("obstruction needs b > 0");
  if (!std::isfinite(p.Q + p.N + p.C0 + p.R0 + p.L + p.b)) throw std::invalid_argument("obstruction parameters must be finite");
}

DerivedConstants derive_constants(const ObstructionParams& p) {
  validate(p);
  DerivedConstants c;
  c.R1 = std::max(p.R0, 2.0 * p.b * (p.L * p.L + 2.0));
  c.t1 = p.L * (p.b + c.R1);
  c.c0 = 4.0 / p.b;
  c.c1 = 4.0 * (p.L * p.L + 1.0);
  return c;
}

AffineBounds fit_affine_bounds(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("affine fit: size mismatch");
  if (x.size() < 2) throw std::invalid_argument("affine fit needs at least two samples");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]) || x[i] < 0.0 || y[i] < 0.0)
      throw std::invalid_argument("affine fit: samples must be finite and nonnegative");
  const double xm = quantile(x, 0.5);
  std::vector<double> ratio;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] >= xm && x[i] > 0.0) ratio.push_back(y[i] / x[i]);
  if (ratio.empty()) throw std::invalid_argument("affine fit needs samples at positive separation");
  const double lo = quantile(ratio, 0.25);
  const double hi = quantile(ratio, 0.75);
  if (!(hi > 1e-9)) throw std::invalid_argument("samples violate every lower quasi-isometry bound");
  AffineBounds fit;
  fit.samples = static_cast<int>(x.size());
  fit.L = std::max({1.0, lo, 1.0 / hi});
  for (std::size_t i = 0; i < x.size(); ++i) fit.b = std::max({fit.b, y[i] - fit.L * x[i], x[i] / fit.L - y[i]});
  fit.max_violation = -kInf;
  for (std::size_t i = 0; i < x.size(); ++i)
    fit.max_violation = std::max({fit.max_violation, y[i] - fit.L * x[i] - fit.b, x[i] / fit.L - fit.b - y[i]});
  return fit;
}

Point3d QuasiGeodesic::operator()(double t) const {
  if (!(t >= k_lo && t <= k_hi)) throw CoverageError("quasi-geodesic parameter outside its range");
  const auto i = std::min(static_cast<std::size_t>(std::floor(t - k_lo)), pieces.size() - 1);
  const double tau = t - (k_lo + static_cast<double>(i));
  return flow_point_at(space, pieces[i], tau * pieces[i].total_time());
}

QuasiGeodesic continuify(const std::function<Point3d(int)>& sigma, int k_lo, int k_hi, const SpaceModel& space,
                         const QuasiGeodesicOptions& opt) {
  if (k_hi <= k_lo) throw std::invalid_argument("continuify needs at least two knots");
  if (opt.certificate_pairs < 2) throw std::invalid_argument("continuify needs at least two certificate pairs");
  QuasiGeodesic q;
  q.space = space;
  q.k_lo = k_lo;
  q.k_hi = k_hi;
  for (int k = k_lo; k <= k_hi; ++k) q.knots.push_back(sigma(k));
  for (std::size_t i = 0; i + 1 < q.knots.size(); ++i) {
    const DistanceResult d = cc_distance_direct(space, q.knots[i], q.knots[i + 1], opt.direct);
    if (!d.converged) throw NonConvergenceError("no certified geodesic between consecutive knots");
    q.pieces.push_back(d.path);
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> param(k_lo, k_hi);
  std::vector<double> dt;
  std::vector<double> dist;
  for (int k = 0; k < opt.certificate_pairs; ++k) {
    const double a = param(rng);
    const double b = param(rng);
    const DistanceResult d = cc_distance_direct(space, q(a), q(b), opt.direct);
    if (!d.converged) throw NonConvergenceError("certificate distance not certified");
    dt.push_back(std::abs(a - b));
    dist.push_back(d.value);
  }
  q.certificate = fit_affine_bounds(dt, dist);
  return q;
}

QuasiGeodesic axis_quasi_geodesic(const SpaceModel& space, int extent, const QuasiGeodesicOptions& opt) {
  if (extent < 1) throw std::invalid_argument("axis extent must be positive");
  return continuify([](int k) { return Point3d(k, 0.0, 0.0); }, -extent, extent, space, opt);
}

std::vector<double> nested_samples(double from, double to, int per_unit) {
  if (!(to >= from) || per_unit < 1) throw std::invalid_argument("nested_samples: bad range");
  std::vector<double> out{from};
  for (auto k = static_cast<long long>(std::floor(from * per_unit)) + 1; static_cast<double>(k) / per_unit < to; ++k)
    if (static_cast<double>(k) / per_unit > from) out.push_back(static_cast<double>(k) / per_unit);
  if (to > from) out.push_back(to);
  return out;
}

ContinuumPair build_continua(const QuasiGeodesic& sigma, const LatticeGraph& g, const DerivedConstants& consts, int n) {
  if (!(n > consts.t1)) throw std::invalid_argument("continua need n > t1");
  if (-n < sigma.k_lo || n > sigma.k_hi) throw CoverageError("index beyond the quasi-geodesic range");
  const int per_unit = samples_per_unit(g.spec().h, sigma.certificate.L);
  ContinuumPair p;
  p.n = n;
  p.e_from = -n;
  p.e_to = -consts.t1;
  p.f_from = consts.t1;
  p.f_to = n;
  p.e_params = nested_samples(p.e_from, p.e_to, per_unit);
  p.f_params = nested_samples(p.f_from, p.f_to, per_unit);
  const auto at = [&](double s) { return sigma(s); };
  p.E = nodes_along(g, at, p.e_params);
  p.F = nodes_along(g, at, p.f_params);
  std::vector<NodeId> both;
  std::set_intersection(p.E.begin(), p.E.end(), p.F.begin(), p.F.end(), std::back_inserter(both));
  if (!both.empty()) throw std::logic_error("continua share a node; the lattice is too coarse");
  p.separation = set_distance(g, p.E, p.F);
  p.slack = 2.0 * g.spec().h;
  return p;
}

template <class Graph>
Density decay_density(const Graph& g, NodeId x0, const DerivedConstants& consts) {
  if (x0 < 0 || x0 >= g.num_nodes()) throw std::out_of_range("x0 not in graph");
  const ShortestPaths sp = dijkstra(g, x0);
  Density rho;
  rho.values.resize(static_cast<std::size_t>(g.num_nodes()));
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const double d = sp.dist[v];
    rho.values[v] = d < consts.R1 ? consts.c0 : consts.c1 / d;
  }
  return rho;
}

double energy_tail_closed_form(const ObstructionParams& p, const DerivedConstants& consts) {
  validate(p);
  return p.C0 * std::pow(consts.c1, p.N) * (p.Q / (p.Q - p.N)) * std::pow(consts.c1 / consts.R1, p.Q - p.N);
}

double energy_tail_quadrature(const ObstructionParams& p, const DerivedConstants& consts) {
  validate(p);
  const double top = std::pow(consts.c1 / consts.R1, p.Q);
  const double a = p.N / p.Q;
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double layered = integrator.integrate([a](double eta) { return std::pow(eta, -a); }, 0.0, top);
  return p.C0 * std::pow(consts.c1, p.N) * layered;
}

template <class Graph>
EnergyBound density_energy_bound(const Graph& g, NodeId x0, const Density& rho, const ObstructionParams& p,
                                 const DerivedConstants& consts) {
  validate(p);
  if (static_cast<NodeId>(rho.values.size()) != g.num_nodes()) throw std::invalid_argument("density size mismatch");
  const ShortestPaths sp = dijkstra(g, x0);
  EnergyBound e;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const double mu = g.node_measure(v);
    if (rho.values[v] > 0.0) e.numeric += mu * std::pow(rho.values[v], p.Q);
    if (sp.dist[v] < consts.R1) e.ball_measure += mu;
  }
  e.tail_closed_form = energy_tail_closed_form(p, consts);
  e.tail_quadrature = energy_tail_quadrature(p, consts);
  e.analytic = std::pow(consts.c0, p.Q) * e.ball_measure + e.tail_closed_form;
  e.jump_ratio = consts.c1 * p.b / (4.0 * consts.R1);
  return e;
}

template <class Graph>
LengthBoundReport length_lower_bound_check(const CurveFamily<Graph>& fam, const DerivedConstants& consts, NodeId x0,
                                           int samples, std::uint64_t seed) {
  validate_family(fam);
  const Graph& g = *fam.graph;
  if (x0 < 0 || x0 >= g.num_nodes()) throw std::out_of_range("x0 not in graph");
  const ShortestPaths from_x0 = dijkstra(g, x0);
  LengthBoundReport rep;
  auto record = [&](const std::vector<NodeId>& path, bool detour) {
    if (path.size() < 2) return;
    double M = 0.0;
    for (NodeId v : path) M = std::max(M, from_x0.dist[v]);
    if (!(M > 0.0) || !std::isfinite(M)) return;
    const double len = path_length(g, path);
    const double ratio = len * consts.c1 / (2.0 * M);
    ++rep.paths;
    if (detour) {
      ++rep.detour_paths;
      rep.min_detour_ratio = std::min(rep.min_detour_ratio, ratio);
    }
    if (ratio < rep.min_ratio) {
      rep.min_ratio = ratio;
      rep.witness_length = len;
      rep.witness_M = M;
    }
  };
  auto nearest_target = [](const ShortestPaths& sp, const std::vector<NodeId>& set) {
    NodeId best = kNoNode;
    for (NodeId v : set)
      if (std::isfinite(sp.dist[v]) && (best == kNoNode || sp.dist[v] < sp.dist[best])) best = v;
    return best;
  };

  const ShortestPaths from_e = dijkstra(g, std::span<const NodeId>(fam.E));
  const NodeId f_best = nearest_target(from_e, fam.F);
  if (f_best == kNoNode) return rep;
  record(extract_path(from_e, f_best), false);

  std::mt19937_64 rng(seed);
  const int noisy = samples / 2;
  for (int k = 0; k < noisy; ++k) {
    const NodeId e = fam.E[std::uniform_int_distribution<std::size_t>(0, fam.E.size() - 1)(rng)];
    const NodeId f = fam.F[std::uniform_int_distribution<std::size_t>(0, fam.F.size() - 1)(rng)];
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> noise(static_cast<std::size_t>(g.num_nodes()));
    for (auto& x : noise) x = unit(rng);
    const ShortestPaths sp =
        dijkstra(g, e, [&](NodeId, NodeId v, double len) { return len * (1.0 + noise[v]); });
    record(extract_path(sp, f), false);
  }
  for (int k = noisy; k < samples; ++k) {
    const NodeId w = std::uniform_int_distribution<NodeId>(0, g.num_nodes() - 1)(rng);
    if (!std::isfinite(from_e.dist[w])) continue;
    auto path = extract_path(from_e, w);
    const ShortestPaths from_w = dijkstra(g, w);
    const NodeId f = nearest_target(from_w, fam.F);
    if (f == kNoNode) continue;
    const auto tail = extract_path(from_w, f);
    path.insert(path.end(), tail.begin() + 1, tail.end());
    record(path, true);
  }
  return rep;
}

// ---------------------------------------------------------------------------

Point3d floor_map(const Point3d& p) {
  return {std::floor(p.x()), std::floor(p.y()), kTwoPi * std::floor(p.z() / kTwoPi)};
}

QIEstimate estimate_qi_constants(int samples, double box, const QIOptions& opt) {
  if (samples < 100) throw std::invalid_argument("quasi-isometry estimate needs at least 100 samples");
  if (!(box > 0.0) || !std::isfinite(box)) throw std::invalid_argument("box must be positive");
  const SpaceModel rt = SpaceModel::roto_translation();
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> coord(0.0, box);
  std::vector<Point3d> targets;
  std::vector<double> d_E;
  for (int k = 0; k < 2 * samples; ++k) {
    const Point3d p(coord(rng), coord(rng), coord(rng));
    const Point3d q(coord(rng), coord(rng), coord(rng));
    targets.push_back(group_mul<double>(rt, group_inverse<double>(rt, p), q));
    d_E.push_back((q - p).norm());
  }
  std::vector<Point3d> corners;
  for (int i = 0; i < 8; ++i) corners.emplace_back(i & 1, (i >> 1) & 1, (i >> 2 & 1) * kTwoPi);
  const std::size_t corner_start = targets.size();
  for (const auto& a : corners)
    for (const auto& c : corners) targets.push_back(group_mul<double>(rt, group_inverse<double>(rt, a), c));

  QIEstimate est;
  est.h = opt.h;
  est.R_E = std::sqrt(2.0 + kTwoPi * kTwoPi);
  // The search region also has to hold the Z^2 x 2 pi Z points used for M_E.
  double ab = 0.0;
  double th = 0.0;
  for (const auto& t : targets) {
    const Point3d c = chart_rt(t);
    ab = std::max({ab, std::abs(c.x()), std::abs(c.y())});
    th = std::max(th, std::abs(c.z()));
  }
  const double margin = 4.0 + opt.h;
  ab = std::max(ab, 4.0 * est.R_E + 4.0) + margin;
  th = std::max(th, 4.0 * est.R_E + 4.0) + std::numbers::pi;
  LatticeSpec spec = box_spec(rt, opt.h, Vector3d(-ab, -ab, -th), Vector3d(ab, ab, th), false);
  spec.stencil_order = opt.stencil_order;
  check_cap(spec, opt.max_nodes, "quasi-isometry");
  const LatticeGraph lg(spec);
  const NodeId origin = *lg.nearest(Point3d::Zero());
  const ShortestPaths sp = dijkstra(lg, origin);
  auto d_rt = [&](const Point3d& g) {
    const auto v = lg.nearest(g);
    if (!v) throw CoverageError("quasi-isometry target outside the lattice");
    if (!std::isfinite(sp.dist[*v])) throw CoverageError("quasi-isometry target not reached");
    return sp.dist[*v] + lg.snap_error(g);
  };
  for (std::size_t k = 0; k < corner_start; ++k) est.d_RT.push_back(d_rt(targets[k]));
  est.d_E = d_E;
  for (std::size_t k = corner_start; k < targets.size(); ++k) est.R_RT = std::max(est.R_RT, d_rt(targets[k]));

  const auto half = static_cast<std::ptrdiff_t>(samples);
  const AffineBounds a = fit_affine_bounds({d_E.begin(), d_E.begin() + half}, {est.d_RT.begin(), est.d_RT.begin() + half});
  const AffineBounds b = fit_affine_bounds({d_E.begin() + half, d_E.end()}, {est.d_RT.begin() + half, est.d_RT.end()});
  est.samples = samples;
  est.L_hat = a.L;
  est.b_hat = a.b;
  est.max_violation = a.max_violation;
  est.L_resample = b.L;
  est.b_resample = b.b;
  est.resample_max_violation = b.max_violation;
  est.L_change = std::abs(b.L - a.L) / a.L;
  est.b_change = std::abs(b.b - a.b) / std::max(a.b, 1e-12);

  const double r = 2.0 * est.R_RT + 1.0;
  const int ij = static_cast<int>(std::ceil(r));
  const int kk = static_cast<int>(std::ceil(r / kTwoPi));
  for (int i = -ij; i <= ij; ++i)
    for (int j = -ij; j <= ij; ++j)
      for (int k = -kk; k <= kk; ++k) {
        const Point3d g(i, j, kTwoPi * k);
        const auto c = chart_rt(g);
        if (std::abs(c.x()) > ab - margin || std::abs(c.y()) > ab - margin) continue;
        if (d_rt(g) <= r) est.ME = std::max(est.ME, g.norm());
      }
  return est;
}

// ---------------------------------------------------------------------------

VolumeConstants fit_volume_constants(const SpaceModel& space, double N, const std::vector<double>& radii, double h) {
  VolumeConstants vc;
  vc.fit = growth_fit_fixed(space, radii, h);
  vc.R0 = *std::min_element(radii.begin(), radii.end());
  for (std::size_t i = 0; i < radii.size(); ++i) vc.C0 = std::max(vc.C0, vc.fit.volumes[i] / std::pow(radii[i], N));
  return vc;
}

namespace {

std::vector<int> default_indices(const DerivedConstants& c, int cap) {
  std::vector<int> out;
  for (double v : {c.t1 + 2.0, 2.0 * c.t1, 4.0 * c.t1, 8.0 * c.t1}) {
    const int n = static_cast<int>(std::ceil(v - 1e-9));
    if (n > c.t1 && n <= cap && (out.empty() || n > out.back())) out.push_back(n);
  }
  return out;
}

bool strictly_increasing(const std::vector<int>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] <= v[i - 1]) return false;
  return true;
}

// Pairwise cc distances between images of sigma samples, cached by parameter pair.
class ImageDistances {
 public:
  ImageDistances(const QuasiGeodesic& sigma, const DirectOptions& opt) : sigma_(sigma), opt_(opt) {}

  Point3d image(double s) const { return contacto_map(sigma_(s)).image; }

  double operator()(double a, double b) {
    if (a > b) std::swap(a, b);
    const auto key = std::make_pair(a, b);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const DistanceResult d = cc_distance_direct(SpaceModel::heisenberg(), image(a), image(b), opt_);
    if (!d.converged) throw NonConvergenceError("image distance not certified");
    cache_.emplace(key, d.value);
    return d.value;
  }

  double diameter(const std::vector<double>& params) {
    double d = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = i + 1; j < params.size(); ++j) d = std::max(d, (*this)(params[i], params[j]));
    return d;
  }

 private:
  const QuasiGeodesic& sigma_;
  DirectOptions opt_;
  std::map<std::pair<double, double>, double> cache_;
};

// Coarse nested samples of [from, to] for |from| <= |to|: the grid of `step` from `from`
// together with every index endpoint within range.
std::vector<double> coarse_samples(double t1, int n, int step, const std::vector<int>& indices, int sign) {
  std::vector<double> out{sign * t1};
  for (int k = 1; t1 + k * step < n; ++k) out.push_back(sign * (t1 + k * step));
  for (int m : indices)
    if (m <= n) out.push_back(sign * static_cast<double>(m));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

ObstructionReport run_obstruction_experiment(const ObstructionConfig& cfg) {
  ObstructionReport rep;
  auto log = [&](const std::string& s) {
    if (cfg.log) cfg.log(s);
  };
  std::string stage = "setup";
  try {
    if (!(cfg.source_h > 0.0) || !(cfg.image_h_over_gap > 0.0) || !(cfg.image_reach_over_gap > 0.0))
      throw std::invalid_argument("resolutions must be positive");
    if (!(cfg.b_min > 0.0)) throw std::invalid_argument("b_min must be positive");
    if (cfg.max_index < 2) throw std::invalid_argument("max_index must be at least 2");

    stage = "sigma";
    log("sigma: continuified x-axis and volume constants");
    auto t0 = std::chrono::steady_clock::now();
    const SpaceModel rt = SpaceModel::roto_translation();
    const QuasiGeodesic sigma = axis_quasi_geodesic(rt, cfg.max_index, cfg.sigma);
    rep.sigma_certificate = sigma.certificate;
    rep.volume = fit_volume_constants(rt, cfg.N, cfg.volume_radii, cfg.volume_h);
    rep.params = {cfg.Q, cfg.N, rep.volume.C0, rep.volume.R0, sigma.certificate.L,
                  std::max(sigma.certificate.b, cfg.b_min)};
    rep.consts = derive_constants(rep.params);
    rep.indices = cfg.indices.empty() ? default_indices(rep.consts, cfg.max_index) : cfg.indices;
    if (rep.indices.empty()) throw std::invalid_argument("no index above t1 within max_index");
    if (!strictly_increasing(rep.indices)) throw std::invalid_argument("indices must be strictly increasing");
    if (rep.indices.front() <= rep.consts.t1) throw std::invalid_argument("indices must exceed t1");
    if (rep.indices.back() > cfg.max_index) throw std::invalid_argument("index beyond max_index");
    rep.seconds_sigma = seconds_since(t0);

    stage = "source";
    t0 = std::chrono::steady_clock::now();
    const LatticeGraph src(source_lattice(rep.indices.back(), cfg));
    rep.source_nodes = src.num_nodes();
    log("source: " + std::to_string(src.num_nodes()) + " nodes");
    const NodeId x0 = *src.nearest(sigma(0.0));
    const Density rho = decay_density(src, x0, rep.consts);
    rep.energy = density_energy_bound(src, x0, rho, rep.params, rep.consts);
    rep.separation_slack = 2.0 * cfg.source_h;
    rep.source_admissible = rep.source_bounded = rep.source_lower_monotone = rep.separated = rep.nested = true;
    std::vector<ContinuumPair> pairs;
    ModulusResult prev;
    for (int n : rep.indices) {
      pairs.push_back(build_continua(sigma, src, rep.consts, n));
      const ContinuumPair& pr = pairs.back();
      CurveFamily<LatticeGraph> fam{&src, pr.E, pr.F};
      SourceRow row;
      row.n = n;
      row.separation = pr.separation;
      row.e_nodes = static_cast<int>(pr.E.size());
      row.f_nodes = static_cast<int>(pr.F.size());
      row.admissibility_min = admissibility_check(fam, rho, cfg.admissibility_samples, cfg.seed + n).min_integral;
      const LengthBoundReport lb = length_lower_bound_check(fam, rep.consts, x0, cfg.length_samples, cfg.seed + n);
      row.length_ratio_min = lb.min_ratio;
      row.length_detour_ratio_min = lb.min_detour_ratio;
      ModulusOptions mo = cfg.source_modulus;
      if (!rep.source.empty()) mo.warm_start = &prev;
      prev = q_modulus(fam, cfg.Q, mo);
      row.modulus_upper = prev.upper;
      row.modulus_lower = prev.lower;
      row.modulus_converged = prev.converged;
      log("source n=" + std::to_string(n) + " modulus [" + std::to_string(prev.lower) + ", " +
          std::to_string(prev.upper) + "]");
      const double tol = 1.0 - rep.admissibility_slack;
      if (!(row.admissibility_min >= tol) || !(row.length_ratio_min >= tol)) rep.source_admissible = false;
      if (!(row.modulus_upper <= rep.energy.numeric * (1.0 + cfg.energy_slack))) rep.source_bounded = false;
      if (!rep.source.empty() && row.modulus_lower < rep.source.back().modulus_lower) rep.source_lower_monotone = false;
      if (!(row.separation >= rep.params.b - rep.separation_slack)) rep.separated = false;
      if (pairs.size() > 1) {
        const auto& a = pairs[pairs.size() - 2];
        if (!contains_all(pr.E, a.E) || !contains_all(pr.F, a.F)) rep.nested = false;
      }
      rep.source.push_back(row);
    }
    rep.seconds_source = seconds_since(t0);

    stage = "image";
    t0 = std::chrono::steady_clock::now();
    ImageDistances dist(sigma, cfg.sigma.direct);
    const double gap = dist(-rep.consts.t1, rep.consts.t1);
    const double h = cfg.image_h_over_gap * gap;
    const double reach = cfg.image_reach_over_gap * gap;
    const int n_max = rep.indices.back();
    const int per_unit = samples_per_unit(h, sigma.certificate.L);
    // Sheared chart (x, y, t + 2xy) of every image sample.
    Vector3d lo = Vector3d::Constant(kInf);
    Vector3d hi = Vector3d::Constant(-kInf);
    for (double s : nested_samples(-n_max, n_max, per_unit)) {
      const Point3d q = dist.image(s);
      const Vector3d c(q.x(), q.y(), q.z() + 2.0 * q.x() * q.y());
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
    const double s_reach = (2.0 / std::numbers::pi + 2.0) * reach * reach;
    const Vector3d pad(reach, reach, s_reach);
    LatticeSpec ispec = box_spec(SpaceModel::heisenberg(), h, lo - pad, hi + pad, true);
    check_cap(ispec, cfg.max_nodes, "image");
    const LatticeGraph img(ispec);
    rep.image_nodes = img.num_nodes();
    log("image: " + std::to_string(img.num_nodes()) + " nodes, gap " + std::to_string(gap));
    const auto at = [&](double s) { return dist.image(s); };
    const int coarse = std::max(1, static_cast<int>(std::ceil((n_max - rep.consts.t1) / std::max(1, cfg.diameter_samples))));
    rep.image_diam_growth = rep.image_separation_bounded = rep.image_ratio_decreasing = rep.image_lower_monotone = true;
    prev = ModulusResult{};
    for (int n : rep.indices) {
      const auto fE = nodes_along(img, at, nested_samples(-n, -rep.consts.t1, per_unit));
      const auto fF = nodes_along(img, at, nested_samples(rep.consts.t1, n, per_unit));
      ImageRow row;
      row.n = n;
      row.separation = set_distance(img, fE, fF);
      row.diam_E = dist.diameter(coarse_samples(rep.consts.t1, n, coarse, rep.indices, -1));
      row.diam_F = dist.diameter(coarse_samples(rep.consts.t1, n, coarse, rep.indices, 1));
      row.ratio = row.separation / std::min(row.diam_E, row.diam_F);
      CurveFamily<LatticeGraph> fam{&img, fE, fF};
      ModulusOptions mo = cfg.image_modulus;
      if (!rep.image.empty()) mo.warm_start = &prev;
      prev = q_modulus(fam, cfg.Q, mo);
      row.modulus_lower = prev.lower;
      row.modulus_upper = prev.upper;
      log("image n=" + std::to_string(n) + " modulus [" + std::to_string(prev.lower) + ", " +
          std::to_string(prev.upper) + "]");
      if (!rep.image.empty()) {
        const ImageRow& a = rep.image.back();
        if (!(row.diam_E >= 1.3 * a.diam_E) || !(row.diam_F >= 1.3 * a.diam_F)) rep.image_diam_growth = false;
        if (!(row.ratio < a.ratio)) rep.image_ratio_decreasing = false;
        if (row.modulus_lower < a.modulus_lower) rep.image_lower_monotone = false;
        if (!(row.separation <= rep.image.front().separation)) rep.image_separation_bounded = false;
      }
      rep.image.push_back(row);
    }
    rep.seconds_image = seconds_since(t0);
    rep.note = "divergence of the image moduli is witnessed only as growth across the tested indices";
    rep.completed = true;
  } catch (const NonConvergenceError& e) {
    rep.error = stage + ": " + e.what();
    rep.error_kind = "non-convergence";
  } catch (const ResourceCapError& e) {
    rep.error = stage + ": " + e.what();
    rep.error_kind = "resource-cap";
  } catch (const CoverageError& e) {
    rep.error = stage + ": " + e.what();
    rep.error_kind = "coverage";
  } catch (const std::exception& e) {
    rep.error = stage + ": " + e.what();
    rep.error_kind = "other";
  }
  return rep;
}

BoundedLoewnerReport bounded_loewner_check(const SpaceModel& space, const ObstructionParams& params,
                                           const std::vector<double>& t_list, const ObstructionConfig& cfg) {
  validate(params);
  if (t_list.empty()) throw std::invalid_argument("bounded_loewner_check needs at least one t");
  for (double t : t_list)
    if (!(t > 0.0)) throw std::invalid_argument("t must be positive");
  BoundedLoewnerReport rep;
  rep.space = space.id;
  rep.params = params;
  rep.consts = derive_constants(params);
  if (space.id != SpaceId::roto_translation) {
    rep.note = "hypothesis unmet: no quasi-geodesic with volume growth below Q is available for this space";
    return rep;
  }
  rep.hypothesis_met = true;
  const DerivedConstants& c = rep.consts;
  // Along the axis dist(E_n, F_n) is about 2 t1 and the diameters about n - t1.
  std::vector<int> guess;
  for (double t : t_list) guess.push_back(static_cast<int>(std::ceil(c.t1 + 2.0 * c.t1 / t)));
  const int g_max = *std::max_element(guess.begin(), guess.end());
  const int rerun = guess.front() + static_cast<int>(std::ceil(0.5 * (guess.front() - c.t1)));
  const int extent = std::max(g_max, rerun) + 4;
  const QuasiGeodesic sigma = axis_quasi_geodesic(space, extent, cfg.sigma);
  const LatticeGraph lg(source_lattice(extent, cfg));
  const NodeId x0 = *lg.nearest(sigma(0.0));
  const Density rho = decay_density(lg, x0, c);
  ObstructionParams p = params;
  rep.energy_bound = density_energy_bound(lg, x0, rho, p, c).numeric;

  auto ratio_of = [&](const ContinuumPair& pr) {
    const auto end_node = [&](double s) { return *lg.nearest(sigma(s)); };
    const ShortestPaths se = dijkstra(lg, end_node(-c.t1));
    const ShortestPaths sf = dijkstra(lg, end_node(c.t1));
    const double de = se.dist[end_node(-pr.n)];
    const double df = sf.dist[end_node(pr.n)];
    return pr.separation / std::min(de, df);
  };
  rep.bounded = true;
  for (std::size_t i = 0; i < t_list.size(); ++i) {
    const double t = t_list[i];
    int n = std::max(static_cast<int>(std::floor(c.t1)) + 1, guess[i] - 2);
    ContinuumPair pr = build_continua(sigma, lg, c, n);
    double r = ratio_of(pr);
    while (r > t && n < extent) {
      pr = build_continua(sigma, lg, c, ++n);
      r = ratio_of(pr);
    }
    if (r > t) throw CoverageError("no index within the lattice reaches the requested ratio");
    const ModulusResult m = q_modulus(CurveFamily<LatticeGraph>{&lg, pr.E, pr.F}, params.Q, cfg.source_modulus);
    rep.rows.push_back({t, n, r, m.upper, m.lower});
    if (!(m.upper <= rep.energy_bound * (1.0 + cfg.energy_slack))) rep.bounded = false;
  }
  const int n2 = std::max(rerun, rep.rows.front().n + 1);
  const ContinuumPair pr = build_continua(sigma, lg, c, std::min(n2, extent));
  rep.rerun_n = pr.n;
  rep.rerun_upper = q_modulus(CurveFamily<LatticeGraph>{&lg, pr.E, pr.F}, params.Q, cfg.source_modulus).upper;
  if (!(rep.rerun_upper <= rep.energy_bound * (1.0 + cfg.energy_slack))) rep.bounded = false;
  return rep;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const ObstructionParams& p) {
  return {{"Q", p.Q}, {"N", p.N}, {"C0", p.C0}, {"R0", p.R0}, {"L", p.L}, {"b", p.b}};
}

nlohmann::json to_json(const DerivedConstants& c) { return {{"R1", c.R1}, {"t1", c.t1}, {"c0", c.c0}, {"c1", c.c1}}; }

nlohmann::json to_json(const AffineBounds& a) {
  return {{"L", a.L}, {"b", a.b}, {"samples", a.samples}, {"max_violation", a.max_violation}};
}

nlohmann::json to_json(const EnergyBound& e) {
  return {{"numeric", e.numeric},
          {"analytic", e.analytic},
          {"ball_measure", e.ball_measure},
          {"tail_closed_form", e.tail_closed_form},
          {"tail_quadrature", e.tail_quadrature},
          {"jump_ratio", e.jump_ratio}};
}

nlohmann::json to_json(const LengthBoundReport& r) {
  return {{"paths", r.paths},
          {"min_ratio", r.min_ratio},
          {"witness_length", r.witness_length},
          {"witness_M", r.witness_M},
          {"detour_paths", r.detour_paths},
          {"min_detour_ratio", r.min_detour_ratio}};
}

nlohmann::json to_json(const QIEstimate& q, bool include_samples) {
  nlohmann::json j = {{"L_hat", q.L_hat},
                      {"b_hat", q.b_hat},
                      {"samples", q.samples},
                      {"max_violation", q.max_violation},
                      {"L_resample", q.L_resample},
                      {"b_resample", q.b_resample},
                      {"L_change", q.L_change},
                      {"b_change", q.b_change},
                      {"resample_max_violation", q.resample_max_violation},
                      {"R_E", q.R_E},
                      {"R_RT", q.R_RT},
                      {"M_E", q.ME},
                      {"h", q.h}};
  if (include_samples) {
    j["d_E"] = q.d_E;
    j["d_RT"] = q.d_RT;
  }
  return j;
}

nlohmann::json to_json(const ObstructionReport& r) {
  nlohmann::json src = nlohmann::json::array();
  for (const auto& s : r.source)
    src.push_back({{"n", s.n},
                   {"separation", s.separation},
                   {"admissibility_min", s.admissibility_min},
                   {"length_ratio_min", s.length_ratio_min},
                   {"length_detour_ratio_min", s.length_detour_ratio_min},
                   {"modulus_lower", s.modulus_lower},
                   {"modulus_upper", s.modulus_upper},
                   {"modulus_converged", s.modulus_converged},
                   {"e_nodes", s.e_nodes},
                   {"f_nodes", s.f_nodes}});
  nlohmann::json img = nlohmann::json::array();
  for (const auto& s : r.image)
    img.push_back({{"n", s.n},
                   {"diam_E", s.diam_E},
                   {"diam_F", s.diam_F},
                   {"separation", s.separation},
                   {"ratio", s.ratio},
                   {"modulus_lower", s.modulus_lower},
                   {"modulus_upper", s.modulus_upper}});
  return {{"params", to_json(r.params)},
          {"constants", to_json(r.consts)},
          {"sigma_certificate", to_json(r.sigma_certificate)},
          {"volume", {{"C0", r.volume.C0}, {"R0", r.volume.R0}, {"fit", to_json(r.volume.fit)}}},
          {"indices", r.indices},
          {"source_nodes", r.source_nodes},
          {"image_nodes", r.image_nodes},
          {"energy", to_json(r.energy)},
          {"source", src},
          {"image", img},
          {"admissibility_slack", r.admissibility_slack},
          {"separation_slack", r.separation_slack},
          {"checks",
           {{"source_admissible", r.source_admissible},
            {"source_bounded", r.source_bounded},
            {"source_lower_monotone", r.source_lower_monotone},
            {"separated", r.separated},
            {"nested", r.nested},
            {"image_diam_growth", r.image_diam_growth},
            {"image_separation_bounded", r.image_separation_bounded},
            {"image_ratio_decreasing", r.image_ratio_decreasing},
            {"image_lower_monotone", r.image_lower_monotone}}},
          {"completed", r.completed},
          {"error", r.error},
          {"error_kind", r.error_kind},
          {"note", r.note}};
}

nlohmann::json to_json(const BoundedLoewnerReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"t", x.t}, {"n", x.n}, {"ratio", x.ratio}, {"modulus_lower", x.modulus_lower}, {"modulus_upper", x.modulus_upper}});
  return {{"space", std::string(to_string(r.space))},
          {"hypothesis_met", r.hypothesis_met},
          {"params", to_json(r.params)},
          {"constants", to_json(r.consts)},
          {"energy_bound", r.energy_bound},
          {"rows", rows},
          {"rerun_n", r.rerun_n},
          {"rerun_upper", r.rerun_upper},
          {"bounded", r.bounded},
          {"note", r.note}};
}

std::string to_csv(const ObstructionReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "n,source_lower,source_upper,image_lower,image_upper,diam_E,diam_F,separation\n";
  for (std::size_t i = 0; i < r.source.size(); ++i) {
    os << r.source[i].n << ',' << r.source[i].modulus_lower << ',' << r.source[i].modulus_upper;
    if (i < r.image.size())
      os << ',' << r.image[i].modulus_lower << ',' << r.image[i].modulus_upper << ',' << r.image[i].diam_E << ','
         << r.image[i].diam_F << ',' << r.image[i].separation;
    else
      os << ",,,,,";
    os << '\n';
  }
  return os.str();
}

#define QCLAB_INSTANTIATE(G)                                                                                  \
  template Density decay_density<G>(const G&, NodeId, const DerivedConstants&);                              \
  template EnergyBound density_energy_bound<G>(const G&, NodeId, const Density&, const ObstructionParams&,   \
                                               const DerivedConstants&);                                     \
  template LengthBoundReport length_lower_bound_check<G>(const CurveFamily<G>&, const DerivedConstants&, NodeId, \
                                                         int, std::uint64_t);

QCLAB_INSTANTIATE(WeightedGraph)
QCLAB_INSTANTIATE(LatticeGraph)

#undef QCLAB_INSTANTIATE

}  // namespace qclab
