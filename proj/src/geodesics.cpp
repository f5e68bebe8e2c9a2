#include "qclab/geodesics.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <unsupported/Eigen/AutoDiff>

#include "qclab/lbfgs.hpp"

namespace qclab {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Ad = Eigen::AutoDiffScalar<Eigen::Vector3d>;

/// Differential of x -> x * b at x.
Matrix3d right_translation_differential(const SpaceModel& space, const Point3d& x, const Point3d& b) {
  Matrix3d d = Matrix3d::Identity();
  switch (space.id) {
    case SpaceId::heisenberg:
      d(2, 0) = -2.0 * b.y();
      d(2, 1) = 2.0 * b.x();
      break;
    case SpaceId::roto_translation: {
      const double c = std::cos(x.z());
      const double s = std::sin(x.z());
      d(0, 2) = -s * b.x() - c * b.y();
      d(1, 2) = c * b.x() - s * b.y();
      break;
    }
    case SpaceId::euclidean:
      break;
  }
  return d;
}

/// Endpoint of K equal-time segments and its gradient with respect to the controls.
class ControlChain {
 public:
  ControlChain(const SpaceModel& space, int segments, const Point3d& target, double scale)
      : space_(space), k_(segments), m_(space.frame_size()), tau_(1.0 / segments), target_(target),
        inv_scale2_(1.0 / (scale * scale)), g_(segments), dg_(segments), suffix_(segments + 1) {}

  int dim() const { return k_ * m_; }
  int segments() const { return k_; }

  Point3d endpoint(const Eigen::VectorXd& u) const {
    Point3d p = Point3d::Zero();
    for (int i = 0; i < k_; ++i) p = group_mul<double>(space_, p, segment_exp<double>(space_, control(u, i), tau_));
    return p;
  }

  double length(const Eigen::VectorXd& u) const {
    double len = 0.0;
    for (int i = 0; i < k_; ++i) len += tau_ * u.segment(i * m_, m_).norm();
    return len;
  }

  double eval(const Eigen::VectorXd& u, Eigen::VectorXd& grad, double mu) {
    for (int i = 0; i < k_; ++i) {
      Point3<Ad> c;
      for (int a = 0; a < 3; ++a) c[a] = Ad(a < m_ ? u[i * m_ + a] : 0.0, 3, a);
      const Point3<Ad> e = segment_exp<Ad>(space_, c, Ad(tau_));
      for (int a = 0; a < 3; ++a) {
        g_[i][a] = e[a].value();
        dg_[i].row(a) = e[a].derivatives().transpose();
      }
    }
    suffix_[k_] = Point3d::Zero();
    for (int i = k_ - 1; i >= 0; --i) suffix_[i] = group_mul<double>(space_, g_[i], suffix_[i + 1]);
    const Vector3d r = suffix_[0] - target_;

    double f = mu * r.squaredNorm();
    grad.resize(dim());
    Point3d prefix = Point3d::Zero();
    const Vector3d w = 2.0 * mu * r;
    for (int i = 0; i < k_; ++i) {
      const Matrix3d jac = left_translation_differential(space_, prefix) *
                           right_translation_differential(space_, g_[i], suffix_[i + 1]) * dg_[i];
      const Vector3d gi = jac.transpose() * w;
      for (int a = 0; a < m_; ++a) {
        const double ua = u[i * m_ + a];
        f += tau_ * inv_scale2_ * ua * ua;
        grad[i * m_ + a] = gi[a] + 2.0 * tau_ * inv_scale2_ * ua;
      }
      prefix = group_mul<double>(space_, prefix, g_[i]);
    }
    return f;
  }

  ControlPath to_path(const Point3d& start, const Eigen::VectorXd& u) const {
    ControlPath path;
    path.start = start;
    for (int i = 0; i < k_; ++i) path.segments.push_back({control(u, i), tau_});
    return path;
  }

 private:
  Vector3d control(const Eigen::VectorXd& u, int i) const {
    Vector3d c = Vector3d::Zero();
    c.head(m_) = u.segment(i * m_, m_);
    return c;
  }

  SpaceModel space_;
  int k_;
  int m_;
  double tau_;
  Point3d target_;
  double inv_scale2_;
  std::vector<Point3d> g_;
  std::vector<Matrix3d> dg_;
  std::vector<Point3d> suffix_;
};

struct StartOutcome {
  Eigen::VectorXd u;
  std::vector<double> round_lengths;  // +inf when not certified at that round
  double endpoint_error = kInf;
};

StartOutcome run_start(ControlChain& chain, Eigen::VectorXd u, const Point3d& target, const DirectOptions& opt) {
  StartOutcome out;
  LbfgsOptions lo;
  lo.max_iterations = opt.inner_iterations;
  lo.gradient_tolerance = 1e-9;
  lo.relative_decrease_tolerance = 1e-13;
  for (int k = 0; k < opt.penalty_rounds; ++k) {
    const double mu = std::pow(10.0, k);
    auto fun = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return chain.eval(x, g, mu); };
    u = minimize_lbfgs(fun, std::move(u), lo).x;
    out.endpoint_error = (chain.endpoint(u) - target).norm();
    out.round_lengths.push_back(out.endpoint_error <= opt.endpoint_tolerance ? chain.length(u) : kInf);
  }
  out.u = std::move(u);
  return out;
}

Eigen::VectorXd straight_start(const SpaceModel& space, int segments, const Point3d& target) {
  const int m = space.frame_size();
  Eigen::VectorXd u(segments * m);
  for (int i = 0; i < segments; ++i) {
    // Small alternating wiggle so the straight start is not a critical point of the penalty.
    const double wiggle = (i % 2 == 0 ? 1e-3 : -1e-3);
    if (space.id == SpaceId::roto_translation) {
      const double drive = target.head<2>().norm();
      u[i * m] = (target.x() < 0.0 ? -drive : drive) + wiggle;
      u[i * m + 1] = target.z() + wiggle;
    } else {
      for (int a = 0; a < m; ++a) u[i * m + a] = target[a] + wiggle * (a + 1);
    }
  }
  return u;
}

}  // namespace

double explicit_upper_bound(const SpaceModel& space, const Point3d& p, const Point3d& q) {
  const Point3d d = group_mul<double>(space, group_inverse<double>(space, p), q);
  const double planar = d.head<2>().norm();
  switch (space.id) {
    case SpaceId::heisenberg:
      // From the identity the straight segment keeps t = 0; a circle enclosing area |t|/4 fixes t.
      return planar + std::sqrt(kPi * std::abs(d.z()));
    case SpaceId::roto_translation: {
      // Turn, drive forward or in reverse, turn.
      const double forward = planar > 0.0 ? std::atan2(d.y(), d.x()) : 0.0;
      const double reverse = forward > 0.0 ? forward - kPi : forward + kPi;
      double best = kInf;
      for (double heading : {forward, reverse}) best = std::min(best, std::abs(heading) + planar + std::abs(d.z() - heading));
      return best;
    }
    case SpaceId::euclidean:
      break;
  }
  return d.norm();
}

DistanceResult cc_distance_direct(const SpaceModel& space, const Point3d& p, const Point3d& q,
                                  const DirectOptions& opt) {
  if (!all_finite(p) || !all_finite(q)) throw std::invalid_argument("cc_distance_direct: nonfinite point");
  if (opt.segments < 1 || opt.penalty_rounds < 1) throw std::invalid_argument("cc_distance_direct: bad options");
  DistanceResult res;
  res.method = DistanceMethod::direct;
  res.path.start = p;
  if (p == q) {
    res.round_values.assign(opt.penalty_rounds, 0.0);
    return res;
  }
  const Point3d target = group_mul<double>(space, group_inverse<double>(space, p), q);
  const double scale = std::max(1.0, explicit_upper_bound(space, Point3d::Zero(), target));
  const int m = space.frame_size();

  int segments = opt.segments;
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(straight_start(space, segments, target));
  for (int s = 0; s < opt.restarts; ++s) {
    std::mt19937_64 rng(opt.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(s) + 1);
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::VectorXd u(segments * m);
    for (auto& x : u) x = normal(rng);
    starts.push_back(std::move(u));
  }

  for (int attempt = 0; attempt < 2; ++attempt) {
    ControlChain chain(space, segments, target, scale);
    std::vector<double> round_best(opt.penalty_rounds, kInf);
    double best = kInf;
    int best_start = -1;
    int closest_start = 0;
    double closest_error = kInf;
    std::vector<StartOutcome> outcomes;
    for (std::size_t s = 0; s < starts.size(); ++s) {
      outcomes.push_back(run_start(chain, starts[s], target, opt));
      const auto& o = outcomes.back();
      for (int k = 0; k < opt.penalty_rounds; ++k) round_best[k] = std::min(round_best[k], o.round_lengths[k]);
      if (o.round_lengths.back() < best) {
        best = o.round_lengths.back();
        best_start = static_cast<int>(s);
      }
      if (o.endpoint_error < closest_error) {
        closest_error = o.endpoint_error;
        closest_start = static_cast<int>(s);
      }
    }
    for (int k = 1; k < opt.penalty_rounds; ++k) round_best[k] = std::min(round_best[k], round_best[k - 1]);
    res.segments = segments;
    res.round_values = round_best;
    if (best_start >= 0) {
      const auto& o = outcomes[best_start];
      res.value = best;
      res.path = chain.to_path(p, o.u);
      res.endpoint_error = o.endpoint_error;
      res.converged = true;
      return res;
    }
    const auto& o = outcomes[closest_start];
    res.value = chain.length(o.u);
    res.path = chain.to_path(p, o.u);
    res.endpoint_error = o.endpoint_error;
    res.converged = false;
    if (!opt.refine_on_stall || attempt == 1) break;
    // Stall: split every segment in two and continue from the closest start.
    Eigen::VectorXd fine(2 * segments * m);
    for (int i = 0; i < segments; ++i) {
      fine.segment(2 * i * m, m) = o.u.segment(i * m, m);
      fine.segment((2 * i + 1) * m, m) = o.u.segment(i * m, m);
    }
    segments *= 2;
    starts = {fine};
  }
  return res;
}

DistanceResult cc_distance_graph(const SpaceModel& space, const Point3d& p, const Point3d& q, double h,
                                 const GraphOptions& opt) {
  if (!(h > 0.0)) throw std::invalid_argument("cc_distance_graph: h must be positive");
  DistanceResult res;
  res.method = DistanceMethod::graph;
  const double ub = explicit_upper_bound(space, p, q);
  LatticeSpec spec = flow_lattice_spec(space, p, std::max(ub, h), h, opt);
  const Index3 ext = spec.hi - spec.lo + Index3::Ones();
  const std::int64_t n = std::int64_t{ext[0]} * ext[1] * ext[2];
  if (n > opt.max_implicit_nodes)
    throw ResourceCapError("distance lattice would have " + std::to_string(n) + " nodes");
  LatticeGraph lg(spec);
  const NodeId src = *lg.nearest(p);
  const auto tgt = lg.nearest(q);
  if (!tgt) throw CoverageError("target outside the distance lattice");
  ShortestPaths sp = dijkstra(lg, src, LengthWeight{}, 2.0 * ub + 8.0 * h);
  if (!std::isfinite(sp.dist[*tgt])) sp = dijkstra(lg, src);
  res.value = sp.dist[*tgt] + lg.snap_error(q);
  for (NodeId v : extract_path(sp, *tgt)) res.node_path.push_back(lg.position(v));
  res.converged = std::isfinite(res.value);
  return res;
}

}  // namespace qclab
