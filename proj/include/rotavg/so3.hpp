#pragma once

// Kernels on SO(3): exponential and logarithm maps, rotation angle,
// n-th roots and nearest-rotation projection.

#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "rotavg/error.hpp"

namespace rotavg {

using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;

/// Frobenius norm of R^T R - I.
inline double orthogonality_error(const Matrix3& m) {
  return (m.transpose() * m - Matrix3::Identity()).norm();
}

inline Matrix3 skew(const Vector3& v) {
  Matrix3 k;
  k << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return k;
}

/// A 3x3 special-orthogonal matrix.
///
/// Construction through from_matrix() validates orthogonality and the
/// determinant; unchecked() is for values produced by the kernels below,
/// which are rotations by construction.
class Rotation {
 public:
  static constexpr double kDefaultTolerance = 1e-12;

  Rotation() : m_(Matrix3::Identity()) {}

  static Rotation identity() { return Rotation(); }

  static Rotation from_matrix(const Matrix3& m,
                              double tolerance = kDefaultTolerance) {
    if (!m.allFinite()) {
      throw Error(ErrorCode::kInvalidArgument, "rotation has non-finite entries");
    }
    const double orth = orthogonality_error(m);
    const double det = m.determinant();
    if (orth > tolerance || std::abs(det - 1.0) > tolerance) {
      throw Error(ErrorCode::kInvalidArgument,
                  "matrix is not a rotation (orthogonality error " +
                      std::to_string(orth) + ", det " + std::to_string(det) + ")");
    }
    return Rotation(m);
  }

  static Rotation unchecked(const Matrix3& m) { return Rotation(m); }

  const Matrix3& matrix() const { return m_; }

  Rotation transpose() const { return Rotation(m_.transpose()); }
  Rotation inverse() const { return transpose(); }

  double trace() const { return m_.trace(); }

  friend Rotation operator*(const Rotation& a, const Rotation& b) {
    return Rotation(a.m_ * b.m_);
  }

 private:
  explicit Rotation(const Matrix3& m) : m_(m) {}

  Matrix3 m_;
};

/// Rotation by `angle` radians about the unit vector `axis`.
struct AxisAngle {
  Vector3 axis = Vector3::UnitZ();
  double angle = 0.0;
};

/// The n rotations E_k with E_k^n = E, all sharing E's axis.
struct RootSet {
  std::vector<Rotation> roots;
  Vector3 axis = Vector3::UnitZ();
  double base_angle = 0.0;
};

namespace detail {

inline void require_unit_axis(const Vector3& axis) {
  if (!axis.allFinite() || std::abs(axis.norm() - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "rotation axis must have unit norm");
  }
}

// First component with magnitude above the noise floor is made positive.
inline Vector3 canonical_axis_sign(Vector3 axis) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(axis[i]) > 1e-12) {
      return axis[i] < 0.0 ? Vector3(-axis) : axis;
    }
  }
  return axis;
}

}  // namespace detail

/// Rodrigues' formula. Any real angle is accepted; the axis must be unit.
inline Rotation exp_axis_angle(const Vector3& axis, double angle) {
  detail::require_unit_axis(axis);
  const Matrix3 k = skew(axis);
  return Rotation::unchecked(Matrix3::Identity() + std::sin(angle) * k +
                             (1.0 - std::cos(angle)) * (k * k));
}

inline Rotation exp_axis_angle(const AxisAngle& a) {
  return exp_axis_angle(a.axis, a.angle);
}

/// Rotation angle in [0, pi].
///
/// Evaluated as atan2(|vee(R - R^T)| / 2, (tr R - 1) / 2), which equals
/// arccos((tr R - 1) / 2) on SO(3) and keeps full precision near 0 and pi.
inline double angle_of(const Rotation& r) {
  const Matrix3& m = r.matrix();
  const Vector3 w(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  const double c = std::clamp((m.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::atan2(0.5 * w.norm(), c);
}

/// Inverse of exp_axis_angle with angle in [0, pi].
///
/// The identity maps to axis (0,0,1); at angle pi, where both axis signs
/// describe the same rotation, the first nonzero axis component is positive.
inline AxisAngle log_rotation(const Rotation& r) {
  const Matrix3& m = r.matrix();
  const Vector3 w(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  const double wn = w.norm();
  const double angle = angle_of(r);

  if (angle < 1e-6) {
    // first-order extraction: R - R^T ~ 2 angle [axis]_x
    if (wn == 0.0) return {Vector3::UnitZ(), 0.0};
    return {w / wn, angle};
  }

  if (kPi - angle > 1e-3) {
    return {w / wn, angle};
  }

  // Near pi: axis from the symmetric part, sign from the skew part.
  const double c = std::cos(angle);
  const Matrix3 aat = (0.5 * (m + m.transpose()) - c * Matrix3::Identity()) / (1.0 - c);
  Eigen::Index col = 0;
  aat.diagonal().maxCoeff(&col);
  Vector3 axis = aat.col(col) / std::sqrt(std::max(aat(col, col), 1e-300));
  axis.normalize();
  if (kPi - angle <= 1e-12) {
    return {detail::canonical_axis_sign(axis), angle};
  }
  if (axis.dot(w) < 0.0) axis = -axis;
  return {axis, angle};
}

/// Checked overload for raw matrices.
inline AxisAngle log_rotation(const Matrix3& m) {
  return log_rotation(Rotation::from_matrix(m));
}

/// roots[k] rotates by base_angle/n - 2k pi/n about E's axis.
inline RootSet nth_roots(const Rotation& e, int n) {
  if (n <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "root order must be positive");
  }
  const AxisAngle log_e = log_rotation(e);
  RootSet set;
  set.axis = log_e.axis;
  set.base_angle = log_e.angle;
  set.roots.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double a = log_e.angle / n - 2.0 * k * kPi / n;
    set.roots.push_back(exp_axis_angle(log_e.axis, a));
  }
  return set;
}

/// Nearest rotation in Frobenius norm: U diag(1, 1, det(U V^T)) V^T.
inline Rotation project_to_rotation(const Matrix3& m) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "matrix has non-finite entries");
  }
  const Eigen::JacobiSVD<Matrix3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector3& s = svd.singularValues();
  if (s[1] <= 1e-12 * std::max(s[0], 1e-300)) {
    throw Error(ErrorCode::kDegenerateProjection,
                "matrix has rank <= 1; nearest rotation is not unique");
  }
  const Matrix3& u = svd.matrixU();
  const Matrix3& v = svd.matrixV();
  const double d = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return Rotation::unchecked(u * Vector3(1.0, 1.0, d).asDiagonal() * v.transpose());
}

/// Geodesic distance between two rotations, in radians.
inline double geodesic_distance(const Rotation& a, const Rotation& b) {
  return angle_of(a.transpose() * b);
}

}  // namespace rotavg
