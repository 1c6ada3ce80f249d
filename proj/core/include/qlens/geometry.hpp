#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

namespace qlens {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Tolerance for accepting a rotation as orthonormal.
inline constexpr double kOrthonormalTolerance = 1e-6;

/// Rigid transform mapping a local frame into the normalized volume frame:
/// world = rotation * local + translation.
struct RigidTransform {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) {
    return {Quat::Identity(), t};
  }

  Vec3 apply_point(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_vector(const Vec3& v) const { return rotation * v; }

  RigidTransform inverse() const {
    const Quat inv = rotation.conjugate();
    return {inv, -(inv * translation)};
  }

  /// (this * other)(p) == this(other(p)); the result rotation is renormalized.
  RigidTransform compose(const RigidTransform& other) const {
    RigidTransform out{rotation * other.rotation, rotation * other.translation + translation};
    out.rotation.normalize();
    return out;
  }

  /// Largest |R^T R - I| entry of the rotation matrix.
  double orthonormality_error() const {
    const Eigen::Matrix3d m = rotation.toRotationMatrix();
    return (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  }

  bool is_rigid(double tol = kOrthonormalTolerance) const {
    return std::abs(rotation.norm() - 1.0) <= tol && orthonormality_error() <= tol;
  }
};

inline bool bitwise_equal(const RigidTransform& a, const RigidTransform& b) {
  return a.rotation.coeffs() == b.rotation.coeffs() && a.translation == b.translation;
}

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit length

  Vec3 at(double t) const { return origin + t * direction; }
};

/// Slab test against the unit cube [0,1]^3. Returns the parametric interval
/// [t_enter, t_exit] clipped to t >= 0, or nothing when the ray misses.
inline std::optional<std::pair<double, double>> intersect_unit_cube(const Ray& ray) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double o = ray.origin[axis];
    const double d = ray.direction[axis];
    if (d == 0.0) {
      if (o < 0.0 || o > 1.0) return std::nullopt;
      continue;
    }
    double ta = (0.0 - o) / d;
    double tb = (1.0 - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

}  // namespace qlens
