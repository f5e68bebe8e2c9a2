#pragma once

#include <array>
#include <optional>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "qclab/types.hpp"

namespace qclab {

/// The three model structures on R^3.
///
/// Heisenberg:        (x,y,t)(x',y',t') = (x+x', y+y', t+t' + 2yx' - 2xy')
///                    X = dx + 2y dt,  Y = dy - 2x dt,  beta = dt - 2y dx + 2x dy
/// Roto-translation:  (x,y,th)(x',y',th') = ((x,y) + R(th)(x',y'), th+th')
///                    X = cos th dx + sin th dy,  Y = dth,  alpha = sin th dx - cos th dy
///                    th lives on the universal cover and is never reduced mod 2 pi.
/// Euclidean:         vector addition, orthonormal coordinate frame (three channels).
enum class SpaceId { heisenberg, roto_translation, euclidean };

struct SpaceModel {
  SpaceId id = SpaceId::heisenberg;

  static constexpr SpaceModel heisenberg() { return {SpaceId::heisenberg}; }
  static constexpr SpaceModel roto_translation() { return {SpaceId::roto_translation}; }
  static constexpr SpaceModel euclidean() { return {SpaceId::euclidean}; }

  /// Number of horizontal control channels: 2 for the groups, 3 for Euclidean space.
  constexpr int frame_size() const { return id == SpaceId::euclidean ? 3 : 2; }
  constexpr bool has_contact_form() const { return id != SpaceId::euclidean; }

  friend constexpr bool operator==(SpaceModel a, SpaceModel b) { return a.id == b.id; }
};

std::string_view to_string(SpaceId id);
/// Accepts "heis", "heisenberg", "h1", "rt", "roto-translation", "e3", "euclidean".
SpaceId parse_space(std::string_view name);

template <typename Scalar>
Point3<Scalar> group_identity() {
  return Point3<Scalar>::Zero();
}

template <typename Scalar>
Point3<Scalar> group_mul(const SpaceModel& space, const Point3<Scalar>& p, const Point3<Scalar>& q) {
  using std::cos;
  using std::sin;
  switch (space.id) {
    case SpaceId::heisenberg:
      return Point3<Scalar>(p.x() + q.x(), p.y() + q.y(),
                            p.z() + q.z() + Scalar(2) * p.y() * q.x() - Scalar(2) * p.x() * q.y());
    case SpaceId::roto_translation: {
      const Scalar c = cos(p.z());
      const Scalar s = sin(p.z());
      return Point3<Scalar>(p.x() + c * q.x() - s * q.y(), p.y() + s * q.x() + c * q.y(), p.z() + q.z());
    }
    case SpaceId::euclidean:
      break;
  }
  return p + q;
}

template <typename Scalar>
Point3<Scalar> group_inverse(const SpaceModel& space, const Point3<Scalar>& p) {
  using std::cos;
  using std::sin;
  if (space.id == SpaceId::roto_translation) {
    // (R(-th)(-x,-y), -th)
    const Scalar c = cos(p.z());
    const Scalar s = sin(p.z());
    return Point3<Scalar>(-(c * p.x() + s * p.y()), -(-s * p.x() + c * p.y()), -p.z());
  }
  return -p;
}

/// Columns are the horizontal frame fields at p; the third column is zero for the groups.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> frame_matrix(const SpaceModel& space, const Point3<Scalar>& p) {
  using std::cos;
  using std::sin;
  Eigen::Matrix<Scalar, 3, 3> m = Eigen::Matrix<Scalar, 3, 3>::Zero();
  switch (space.id) {
    case SpaceId::heisenberg:
      m(0, 0) = Scalar(1);
      m(2, 0) = Scalar(2) * p.y();
      m(1, 1) = Scalar(1);
      m(2, 1) = Scalar(-2) * p.x();
      break;
    case SpaceId::roto_translation:
      m(0, 0) = cos(p.z());
      m(1, 0) = sin(p.z());
      m(2, 1) = Scalar(1);
      break;
    case SpaceId::euclidean:
      m.setIdentity();
      break;
  }
  return m;
}

/// Exact left-invariant flow from the identity: exp(duration * (u1 X + u2 Y [+ u3 Z])).
/// Controls beyond the frame size are ignored.
template <typename Scalar>
Point3<Scalar> segment_exp(const SpaceModel& space, const Point3<Scalar>& control, const Scalar& duration) {
  using std::abs;
  using std::cos;
  using std::sin;
  switch (space.id) {
    case SpaceId::heisenberg:
      // Starting at x = y = 0 the t-velocity 2(y u1 - x u2) stays zero along the line.
      return Point3<Scalar>(control.x() * duration, control.y() * duration, Scalar(0));
    case SpaceId::roto_translation: {
      const Scalar phi = control.y() * duration;
      const Scalar advance = control.x() * duration;
      Scalar sinc_phi;
      Scalar cosc_phi;
      if (abs(phi) < Scalar(1e-4)) {
        const Scalar phi2 = phi * phi;
        sinc_phi = Scalar(1) - phi2 / Scalar(6) + phi2 * phi2 / Scalar(120);
        cosc_phi = phi / Scalar(2) - phi * phi2 / Scalar(24);
      } else {
        sinc_phi = sin(phi) / phi;
        cosc_phi = (Scalar(1) - cos(phi)) / phi;
      }
      return Point3<Scalar>(advance * sinc_phi, advance * cosc_phi, phi);
    }
    case SpaceId::euclidean:
      break;
  }
  return control * duration;
}

// ---------------------------------------------------------------------------

struct Frame {
  TangentVector X;
  TangentVector Y;
  /// Present only for the Euclidean model.
  std::optional<TangentVector> Z;
};

Frame frame_eval(const SpaceModel& space, const Point3d& p);

/// beta for Heisenberg, alpha for roto-translation. Throws for Euclidean space.
double contact_form_eval(const SpaceModel& space, const Point3d& p, const TangentVector& v);

/// Finite-difference commutator of the X and Y flows at p, divided by h^2.
/// Converges to [X,Y](p) with O(h) error.
TangentVector bracket_numeric(const SpaceModel& space, const Point3d& p, double h);

/// Analytic differential of q -> g q.
Matrix3d left_translation_differential(const SpaceModel& space, const Point3d& g);

/// Determinant of the differential of L_g, evaluated through the block structure
/// of the differential: unit-triangular for Heisenberg, diag(rotation, 1) for RT.
double left_translation_jacobian(const SpaceModel& space, const Point3d& g);

/// Floating-point determinant of left_translation_differential.
double left_translation_jacobian_numeric(const SpaceModel& space, const Point3d& g);

// ---------------------------------------------------------------------------

struct ControlSegment {
  Vector3d control = Vector3d::Zero();  // (u1, u2[, u3])
  double duration = 0.0;
};

struct ControlPath {
  Point3d start = Point3d::Zero();
  std::vector<ControlSegment> segments;

  double length(const SpaceModel& space) const;
  double total_time() const;
};

/// Exact endpoint, composing the segment exponentials by left translation.
Point3d flow_endpoint(const SpaceModel& space, const ControlPath& path);

/// Exact point reached after running the path for time `time` (clamped to its total time).
Point3d flow_point_at(const SpaceModel& space, const ControlPath& path, double time);

/// Classical RK4 on gamma' = sum u_i F_i(gamma). Every segment gets at least 16 steps
/// and steps no longer than dt. Returns the sampled trajectory including the start.
std::vector<Point3d> horizontal_flow(const SpaceModel& space, const ControlPath& path, double dt);

/// Left translation of a whole control path.
ControlPath left_translate(const SpaceModel& space, const Point3d& g, ControlPath path);

}  // namespace qclab
