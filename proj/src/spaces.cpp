#include "qclab/spaces.hpp"

#include <algorithm>
#include <stdexcept>

#include <Eigen/LU>

namespace qclab {

std::string_view to_string(SpaceId id) {
  switch (id) {
    case SpaceId::heisenberg:
      return "heisenberg";
    case SpaceId::roto_translation:
      return "roto-translation";
    case SpaceId::euclidean:
      return "euclidean";
  }
  return "unknown";
}

SpaceId parse_space(std::string_view name) {
  if (name == "heis" || name == "heisenberg" || name == "h1") return SpaceId::heisenberg;
  if (name == "rt" || name == "roto-translation" || name == "roto_translation") return SpaceId::roto_translation;
  if (name == "e3" || name == "euclid" || name == "euclidean") return SpaceId::euclidean;
  throw std::invalid_argument("unknown space '" + std::string(name) + "' (expected heis, rt or e3)");
}

Frame frame_eval(const SpaceModel& space, const Point3d& p) {
  const Matrix3d m = frame_matrix<double>(space, p);
  Frame f;
  f.X = {p, m.col(0)};
  f.Y = {p, m.col(1)};
  if (space.frame_size() == 3) f.Z = TangentVector{p, m.col(2)};
  return f;
}

double contact_form_eval(const SpaceModel& space, const Point3d& p, const TangentVector& v) {
  const Vector3d& c = v.components;
  switch (space.id) {
    case SpaceId::heisenberg:
      return c.z() - 2.0 * p.y() * c.x() + 2.0 * p.x() * c.y();
    case SpaceId::roto_translation:
      return std::sin(p.z()) * c.x() - std::cos(p.z()) * c.y();
    case SpaceId::euclidean:
      break;
  }
  throw std::invalid_argument("the Euclidean model carries no contact form");
}

TangentVector bracket_numeric(const SpaceModel& space, const Point3d& p, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("bracket_numeric: h must be positive");
  // X for h, Y for h, -X for h, -Y for h leaves p + h^2 [X,Y](p) + O(h^3).
  ControlPath loop;
  loop.start = p;
  loop.segments = {{Vector3d(1, 0, 0), h}, {Vector3d(0, 1, 0), h}, {Vector3d(-1, 0, 0), h}, {Vector3d(0, -1, 0), h}};
  const auto traj = horizontal_flow(space, loop, h / 16.0);
  return {p, (traj.back() - p) / (h * h)};
}

Matrix3d left_translation_differential(const SpaceModel& space, const Point3d& g) {
  Matrix3d d = Matrix3d::Identity();
  switch (space.id) {
    case SpaceId::heisenberg:
      d(2, 0) = 2.0 * g.y();
      d(2, 1) = -2.0 * g.x();
      break;
    case SpaceId::roto_translation: {
      const double c = std::cos(g.z());
      const double s = std::sin(g.z());
      d(0, 0) = c;
      d(0, 1) = -s;
      d(1, 0) = s;
      d(1, 1) = c;
      break;
    }
    case SpaceId::euclidean:
      break;
  }
  return d;
}

double left_translation_jacobian(const SpaceModel& space, const Point3d& g) {
  const Matrix3d d = left_translation_differential(space, g);
  switch (space.id) {
    case SpaceId::heisenberg:
      // Lower unit-triangular: the determinant is the product of the diagonal.
      return d(0, 0) * d(1, 1) * d(2, 2);
    case SpaceId::roto_translation:
      // diag(R(theta), 1) with R(theta) in SO(2): det R = cos^2 + sin^2 = 1 identically.
      return 1.0 * d(2, 2);
    case SpaceId::euclidean:
      break;
  }
  return d.diagonal().prod();
}

double left_translation_jacobian_numeric(const SpaceModel& space, const Point3d& g) {
  return left_translation_differential(space, g).determinant();
}

// ---------------------------------------------------------------------------

double ControlPath::length(const SpaceModel& space) const {
  const int m = space.frame_size();
  double total = 0.0;
  for (const auto& seg : segments) total += seg.duration * seg.control.head(m).norm();
  return total;
}

double ControlPath::total_time() const {
  double t = 0.0;
  for (const auto& seg : segments) t += seg.duration;
  return t;
}

namespace {

Vector3d masked_control(const SpaceModel& space, const Vector3d& u) {
  Vector3d c = u;
  if (space.frame_size() == 2) c.z() = 0.0;
  return c;
}

}  // namespace

Point3d flow_endpoint(const SpaceModel& space, const ControlPath& path) {
  Point3d p = path.start;
  for (const auto& seg : path.segments) {
    p = group_mul<double>(space, p, segment_exp<double>(space, masked_control(space, seg.control), seg.duration));
  }
  return p;
}

Point3d flow_point_at(const SpaceModel& space, const ControlPath& path, double time) {
  Point3d p = path.start;
  double remaining = std::max(0.0, time);
  for (const auto& seg : path.segments) {
    if (remaining <= 0.0) break;
    const double tau = std::min(remaining, seg.duration);
    p = group_mul<double>(space, p, segment_exp<double>(space, masked_control(space, seg.control), tau));
    remaining -= tau;
  }
  return p;
}

std::vector<Point3d> horizontal_flow(const SpaceModel& space, const ControlPath& path, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("horizontal_flow: dt must be positive");
  std::vector<Point3d> out{path.start};
  Point3d p = path.start;
  for (const auto& seg : path.segments) {
    if (!seg.control.allFinite() || !std::isfinite(seg.duration)) {
      throw std::invalid_argument("horizontal_flow: nonfinite control");
    }
    if (seg.duration < 0.0) throw std::invalid_argument("horizontal_flow: negative duration");
    if (seg.duration == 0.0) continue;
    const Vector3d u = masked_control(space, seg.control);
    const int steps = std::max(16, static_cast<int>(std::ceil(seg.duration / dt)));
    const double step = seg.duration / steps;
    auto velocity = [&](const Point3d& q) -> Vector3d { return frame_matrix<double>(space, q) * u; };
    for (int i = 0; i < steps; ++i) {
      const Vector3d k1 = velocity(p);
      const Vector3d k2 = velocity(p + 0.5 * step * k1);
      const Vector3d k3 = velocity(p + 0.5 * step * k2);
      const Vector3d k4 = velocity(p + step * k3);
      p += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      out.push_back(p);
    }
  }
  return out;
}

ControlPath left_translate(const SpaceModel& space, const Point3d& g, ControlPath path) {
  path.start = group_mul<double>(space, g, path.start);
  return path;
}

}  // namespace qclab
