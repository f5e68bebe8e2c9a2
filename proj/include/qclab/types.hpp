#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace qclab {

template <typename Scalar>
using Point3 = Eigen::Matrix<Scalar, 3, 1>;
using Point3d = Point3<double>;
using Vector3d = Eigen::Vector3d;
using Matrix3d = Eigen::Matrix3d;

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

/// A tangent vector in the global R^3 chart, with coefficients on d/dx, d/dy, d/dz.
struct TangentVector {
  Point3d base = Point3d::Zero();
  Vector3d components = Vector3d::Zero();
};

/// Raised when an iterative method cannot reach its stated tolerance within budget.
class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a discretization would exceed the configured memory cap.
class ResourceCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a query leaves the region covered by a graph.
class CoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Point3d& p) { return p.allFinite(); }

}  // namespace qclab
