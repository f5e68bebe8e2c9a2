#include "qclab/contacto.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/LU>

namespace qclab {

namespace {

constexpr double kPi = 3.14159265358979323846;

const SpaceModel kRT = SpaceModel::roto_translation();
const SpaceModel kH = SpaceModel::heisenberg();

/// beta_q(w) for w given by components.
double beta(const Point3d& q, const Vector3d& w) { return contact_form_eval(kH, q, {q, w}); }
double alpha(const Point3d& p, const Vector3d& v) { return contact_form_eval(kRT, p, {p, v}); }

Point3d random_point(std::mt19937_64& rng, double box) {
  std::uniform_real_distribution<double> u(-box, box);
  const double x = u(rng);
  const double y = u(rng);
  const double th = u(rng);
  return {x, y, th};
}

}  // namespace

ContactMapResult contacto_map(const Point3d& p) {
  const double x = p.x();
  const double y = p.y();
  const double th = p.z();
  const double c = std::cos(th);
  const double s = std::sin(th);
  ContactMapResult r;
  r.image = {-x * c - y * s, th, 4.0 * x * s - 4.0 * y * c - 2.0 * x * th * c - 2.0 * y * th * s};
  r.jacobian << -c, -s, x * s - y * c,
      0.0, 0.0, 1.0,
      4.0 * s - 2.0 * th * c, -4.0 * c - 2.0 * th * s,
      4.0 * x * c + 4.0 * y * s - 2.0 * x * c + 2.0 * x * th * s - 2.0 * y * s - 2.0 * y * th * c;
  return r;
}

Matrix3d contacto_jacobian_fd(const Point3d& p, double h) {
  Matrix3d j;
  for (int a = 0; a < 3; ++a) {
    Point3d lo = p;
    Point3d hi = p;
    lo[a] -= h;
    hi[a] += h;
    j.col(a) = (contacto_map(hi).image - contacto_map(lo).image) / (2.0 * h);
  }
  return j;
}

Point3d contacto_inverse(const Point3d& q, double tol) {
  const double th = q.y();
  const double c = std::cos(th);
  const double s = std::sin(th);
  Eigen::Matrix2d m;
  m << -c, -s, 4.0 * s - 2.0 * th * c, -4.0 * c - 2.0 * th * s;
  const double det = m.determinant();
  if (!(std::abs(det) > 1e-12)) {
    std::ostringstream os;
    os << "contacto_inverse: singular system, det=" << det << " at theta=" << th;
    throw NonConvergenceError(os.str());
  }
  const Eigen::Vector2d xy = m.partialPivLu().solve(Eigen::Vector2d(q.x(), q.z()));
  const Point3d p(xy[0], xy[1], th);
  const double err = (contacto_map(p).image - q).norm();
  if (!(err <= tol * (1.0 + q.norm()))) {
    std::ostringstream os;
    os << "contacto_inverse: round trip error " << err << " exceeds " << tol;
    throw NonConvergenceError(os.str());
  }
  return p;
}

PullbackReport pullback_check(int samples, std::uint64_t seed, double box) {
  if (samples < 1) throw std::invalid_argument("pullback_check needs samples >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PullbackReport r;
  r.samples = samples;
  for (int k = 0; k < samples; ++k) {
    const Point3d p = random_point(rng, box);
    const Vector3d v(u(rng), u(rng), u(rng));
    const ContactMapResult f = contacto_map(p);
    const Matrix3d jfd = contacto_jacobian_fd(p);
    const double rhs = 4.0 * alpha(p, v);
    r.max_error = std::max(r.max_error, std::abs(beta(f.image, f.jacobian * v) - rhs) / (1.0 + std::abs(rhs)));
    r.max_error_fd = std::max(r.max_error_fd, std::abs(beta(f.image, jfd * v) - rhs) / (1.0 + std::abs(rhs)));
    r.max_jacobian_gap = std::max(r.max_jacobian_gap, (f.jacobian - jfd).cwiseAbs().maxCoeff());
  }
  return r;
}

HorizontalityReport pushforward_horizontality_check(int samples, std::uint64_t seed, double box) {
  if (samples < 1) throw std::invalid_argument("pushforward_horizontality_check needs samples >= 1");
  std::mt19937_64 rng(seed);
  HorizontalityReport r;
  r.samples = samples;
  for (int k = 0; k < samples; ++k) {
    const Point3d p = random_point(rng, box);
    const ContactMapResult f = contacto_map(p);
    const Frame fr = frame_eval(kRT, p);
    for (const TangentVector* field : {&fr.X, &fr.Y})
      r.max_defect = std::max(r.max_defect, std::abs(beta(f.image, f.jacobian * field->components)));
  }
  const Point3d p(0.3, -0.7, kPi / 4.0);
  const ContactMapResult f = contacto_map(p);
  r.vertical_control = std::abs(beta(f.image, f.jacobian * Vector3d(1.0, 0.0, 0.0)));
  return r;
}

BilipEstimate local_bilip_estimate(double ball_radius, int pairs, std::uint64_t seed, const DirectOptions& opt) {
  if (!(ball_radius > 0.0) || pairs < 1) throw std::invalid_argument("local_bilip_estimate: bad arguments");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto sample = [&]() {
    ControlPath path;
    constexpr int kPieces = 4;
    const double budget = ball_radius * u(rng);
    for (int i = 0; i < kPieces; ++i) {
      const double ang = 2.0 * kPi * u(rng);
      path.segments.push_back({Vector3d(std::cos(ang), std::sin(ang), 0.0), budget / kPieces});
    }
    return flow_endpoint(kRT, path);
  };
  BilipEstimate est;
  est.ball_radius = ball_radius;
  est.lower = kInf;
  est.upper = 0.0;
  while (est.pairs < pairs) {
    const Point3d p = sample();
    const Point3d q = sample();
    if ((p - q).norm() < 1e-9) continue;
    const DistanceResult d_rt = cc_distance_direct(kRT, p, q, opt);
    const DistanceResult d_h = cc_distance_direct(kH, contacto_map(p).image, contacto_map(q).image, opt);
    if (!d_rt.converged || !d_h.converged) throw NonConvergenceError("local_bilip_estimate: distance not certified");
    const double ratio = d_h.value / d_rt.value;
    est.lower = std::min(est.lower, ratio);
    est.upper = std::max(est.upper, ratio);
    ++est.pairs;
  }
  return est;
}

nlohmann::json to_json(const PullbackReport& r) {
  return {{"samples", r.samples},
          {"max_pullback_error", r.max_error},
          {"max_pullback_error_fd", r.max_error_fd},
          {"max_jacobian_gap", r.max_jacobian_gap}};
}

nlohmann::json to_json(const HorizontalityReport& r) {
  return {{"samples", r.samples}, {"max_horizontality_defect", r.max_defect}, {"vertical_control", r.vertical_control}};
}

nlohmann::json to_json(const BilipEstimate& r) {
  return {{"ball_radius", r.ball_radius}, {"pairs", r.pairs}, {"lower", r.lower}, {"upper", r.upper}};
}

}  // namespace qclab
