#include "qlens/quadric_lens.hpp"

#include <cmath>
#include <string>

#include "qlens/error.hpp"

namespace qlens {

std::string_view to_string(FocusAttribute attribute) noexcept {
  return attribute == FocusAttribute::scalar ? "scalar" : "gradient_magnitude";
}

FocusAttribute parse_focus_attribute(std::string_view text) {
  if (text == "scalar") return FocusAttribute::scalar;
  if (text == "gradient_magnitude") return FocusAttribute::gradient_magnitude;
  throw Error(ErrorKind::validation, "unknown focus attribute '" + std::string(text) + "'");
}

std::string_view to_string(QuadricClass c) noexcept {
  switch (c) {
    case QuadricClass::plane: return "plane";
    case QuadricClass::parabolic_cylinder: return "parabolic_cylinder";
    case QuadricClass::elliptic_paraboloid: return "elliptic_paraboloid";
    case QuadricClass::rotational_paraboloid: return "rotational_paraboloid";
    case QuadricClass::hyperbolic_paraboloid: return "hyperbolic_paraboloid";
  }
  return "?";
}

std::string_view to_string(HandleKind kind) noexcept {
  switch (kind) {
    case HandleKind::origin: return "origin";
    case HandleKind::k1_pos: return "k1_pos";
    case HandleKind::k1_neg: return "k1_neg";
    case HandleKind::k2_pos: return "k2_pos";
    case HandleKind::k2_neg: return "k2_neg";
  }
  return "?";
}

std::string_view to_string(CurvatureMapping mapping) noexcept {
  return mapping == CurvatureMapping::literal ? "literal" : "exact_tracking";
}

CurvatureMapping parse_curvature_mapping(std::string_view text) {
  if (text == "literal") return CurvatureMapping::literal;
  if (text == "exact_tracking") return CurvatureMapping::exact_tracking;
  throw Error(ErrorKind::validation, "unknown curvature mapping '" + std::string(text) + "'");
}

void QuadricLens::validate() const {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw Error(ErrorKind::validation, "lens " + std::to_string(id) + ": length must be > 0");
  }
  if (!(std::abs(k1) <= kMaxCurvature) || !(std::abs(k2) <= kMaxCurvature)) {
    throw Error(ErrorKind::validation,
                "lens " + std::to_string(id) + ": |k1|, |k2| must be <= " + std::to_string(kMaxCurvature));
  }
  if (!pose.translation.allFinite() || !pose.rotation.coeffs().allFinite() || !pose.is_rigid()) {
    throw Error(ErrorKind::validation,
                "lens " + std::to_string(id) + ": pose rotation is not orthonormal");
  }
}

bool bitwise_equal(const QuadricLens& a, const QuadricLens& b) {
  return a.id == b.id && bitwise_equal(a.pose, b.pose) && a.length == b.length && a.k1 == b.k1 &&
         a.k2 == b.k2 && a.locked == b.locked && a.attribute_override == b.attribute_override;
}

double quadric_height(double k1, double k2, double x, double y) noexcept {
  return 0.5 * (k1 * x * x + k2 * y * y);
}

QuadricClass classify(double k1, double k2, double eps) noexcept {
  const bool zero1 = std::abs(k1) <= eps;
  const bool zero2 = std::abs(k2) <= eps;
  if (zero1 && zero2) return QuadricClass::plane;
  if (zero1 || zero2) return QuadricClass::parabolic_cylinder;
  if (k1 * k2 < 0.0) return QuadricClass::hyperbolic_paraboloid;
  if (std::abs(k1 - k2) <= eps) return QuadricClass::rotational_paraboloid;
  return QuadricClass::elliptic_paraboloid;
}

Vec3 local_control_point(const QuadricLens& lens, HandleKind kind) noexcept {
  // c_{i,k} = 1/2 ((-1)^i l, 0, k (l/2)^2) with i = 2 -> +, i = 1 -> -.
  const double l = lens.length;
  const double rim = 0.25 * l * l;
  switch (kind) {
    case HandleKind::origin: return Vec3::Zero();
    case HandleKind::k1_pos: return 0.5 * Vec3(l, 0.0, lens.k1 * rim);
    case HandleKind::k1_neg: return 0.5 * Vec3(-l, 0.0, lens.k1 * rim);
    case HandleKind::k2_pos: return 0.5 * Vec3(0.0, l, lens.k2 * rim);
    case HandleKind::k2_neg: return 0.5 * Vec3(0.0, -l, lens.k2 * rim);
  }
  return Vec3::Zero();
}

std::array<ControlPointHandle, 5> control_points(const QuadricLens& lens) {
  std::array<ControlPointHandle, 5> out;
  for (std::size_t i = 0; i < kAllHandleKinds.size(); ++i) {
    const HandleKind kind = kAllHandleKinds[i];
    out[i] = {lens.id, kind, lens.pose.apply_point(local_control_point(lens, kind))};
  }
  return out;
}

Vec3 surface_normal(double k1, double k2, double x, double y) noexcept {
  return Vec3(-k1 * x, -k2 * y, 1.0).normalized();
}

Vec3 surface_point(const QuadricLens& lens, const Vec2& uv) noexcept {
  return lens.pose.apply_point(Vec3(uv.x(), uv.y(), quadric_height(lens.k1, lens.k2, uv.x(), uv.y())));
}

Vec3 surface_world_normal(const QuadricLens& lens, const Vec2& uv) noexcept {
  return lens.pose.apply_vector(surface_normal(lens.k1, lens.k2, uv.x(), uv.y()));
}

LensMesh tessellate(const QuadricLens& lens, int resolution) {
  if (resolution < 2) {
    throw Error(ErrorKind::validation,
                "tessellation resolution must be >= 2 (got " + std::to_string(resolution) + ")");
  }
  const auto n = static_cast<std::size_t>(resolution);
  LensMesh mesh;
  mesh.positions.reserve(n * n);
  mesh.normals.reserve(n * n);
  mesh.uv.reserve(n * n);
  const double half = 0.5 * lens.length;
  const double step = lens.length / (resolution - 1);
  for (int j = 0; j < resolution; ++j) {
    const double y = j == resolution - 1 ? half : -half + j * step;
    for (int i = 0; i < resolution; ++i) {
      const double x = i == resolution - 1 ? half : -half + i * step;
      const Vec2 uv(x, y);
      mesh.uv.push_back(uv);
      mesh.positions.push_back(surface_point(lens, uv));
      mesh.normals.push_back(surface_world_normal(lens, uv));
    }
  }
  mesh.triangles.reserve(2 * (n - 1) * (n - 1));
  for (std::uint32_t j = 0; j + 1 < n; ++j) {
    for (std::uint32_t i = 0; i + 1 < n; ++i) {
      const std::uint32_t v00 = j * static_cast<std::uint32_t>(n) + i;
      const std::uint32_t v10 = v00 + 1;
      const std::uint32_t v01 = v00 + static_cast<std::uint32_t>(n);
      const std::uint32_t v11 = v01 + 1;
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }
  return mesh;
}

std::vector<SurfaceHit> ray_intersect(const QuadricLens& lens, const Ray& ray) {
  const Quat to_local = lens.pose.rotation.conjugate();
  const Vec3 o = to_local * (ray.origin - lens.pose.translation);
  const Vec3 d = to_local * ray.direction;

  // 1/2 k1 (ox + t dx)^2 + 1/2 k2 (oy + t dy)^2 - (oz + t dz) = 0
  const double a = 0.5 * (lens.k1 * d.x() * d.x() + lens.k2 * d.y() * d.y());
  const double b = lens.k1 * o.x() * d.x() + lens.k2 * o.y() * d.y() - d.z();
  const double c = 0.5 * (lens.k1 * o.x() * o.x() + lens.k2 * o.y() * o.y()) - o.z();

  double roots[2];
  int count = 0;
  if (std::abs(a) <= kLinearThreshold) {
    if (b != 0.0) roots[count++] = -c / b;
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc == 0.0) {
      roots[count++] = -b / (2.0 * a);
    } else if (disc > 0.0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (b + std::copysign(sq, b));
      roots[count++] = q / a;
      if (q != 0.0) roots[count++] = c / q;
    }
  }
  if (count == 2 && roots[1] < roots[0]) std::swap(roots[0], roots[1]);

  std::vector<SurfaceHit> hits;
  const double bound = 0.5 * lens.length + kPatchBoundSlack;
  for (int r = 0; r < count; ++r) {
    const double t = roots[r];
    if (!(t >= 0.0)) continue;
    const double x = o.x() + t * d.x();
    const double y = o.y() + t * d.y();
    if (std::abs(x) > bound || std::abs(y) > bound) continue;
    SurfaceHit hit;
    hit.t = t;
    hit.uv = Vec2(x, y);
    hit.world_point = ray.at(t);
    hit.world_normal = lens.pose.apply_vector(surface_normal(lens.k1, lens.k2, x, y));
    hits.push_back(hit);
  }
  return hits;
}

namespace {

std::optional<NearestHandle> nearest_impl(std::span<const QuadricLens> lenses, const Vec3& p,
                                          bool include_locked) {
  std::optional<NearestHandle> best;
  for (const auto& lens : lenses) {
    if (lens.locked && !include_locked) continue;
    for (const auto& handle : control_points(lens)) {
      const double dist = (handle.world_position - p).norm();
      bool better = !best.has_value() || dist < best->distance;
      if (!better && dist == best->distance) {
        better = handle.lens_id < best->handle.lens_id ||
                 (handle.lens_id == best->handle.lens_id && handle.kind < best->handle.kind);
      }
      if (better) best = NearestHandle{handle, dist};
    }
  }
  return best;
}

}  // namespace

std::optional<NearestHandle> nearest_control_point(std::span<const QuadricLens> lenses,
                                                   const Vec3& p) {
  return nearest_impl(lenses, p, false);
}

std::optional<NearestHandle> nearest_control_point_any(std::span<const QuadricLens> lenses,
                                                       const Vec3& p) {
  return nearest_impl(lenses, p, true);
}

CurvatureEdit set_curvature(const QuadricLens& lens, HandleKind kind, double delta_z,
                            double sensitivity, CurvatureMapping mapping) {
  if (lens.locked) {
    throw Error(ErrorKind::locked, "lens " + std::to_string(lens.id) + " is locked");
  }
  CurvatureEdit edit{lens, false};
  if (!is_curvature_handle(kind)) return edit;

  double delta_k = 0.0;
  if (mapping == CurvatureMapping::literal) {
    delta_k = sensitivity * delta_z;
  } else {
    // handle z = k (l/2)^2 / 2
    const double half = 0.5 * lens.length;
    delta_k = delta_z / (0.5 * half * half);
  }
  double& k = (kind == HandleKind::k1_pos || kind == HandleKind::k1_neg) ? edit.lens.k1 : edit.lens.k2;
  k = std::clamp(k + delta_k, -kMaxCurvature, kMaxCurvature);
  edit.applied = true;
  return edit;
}

}  // namespace qlens
