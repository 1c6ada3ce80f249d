#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qlens/geometry.hpp"

namespace qlens {

/// Curvature magnitude bound (normalized units).
inline constexpr double kMaxCurvature = 10.0;
/// Below this |A| the ray/quadric equation is solved as a linear one.
inline constexpr double kLinearThreshold = 1e-12;
/// Slack admitted on the |x|,|y| <= l/2 patch bound.
inline constexpr double kPatchBoundSlack = 1e-12;
inline constexpr int kDefaultTessellation = 65;

using LensId = std::uint32_t;

enum class FocusAttribute { scalar, gradient_magnitude };

std::string_view to_string(FocusAttribute attribute) noexcept;
FocusAttribute parse_focus_attribute(std::string_view text);

/// One deformable patch z = (k1 x^2 + k2 y^2) / 2 over the square
/// |x|,|y| <= length/2 of its local frame. `pose` places the local frame in
/// the normalized volume frame; the local z axis is the patch normal at the
/// origin.
struct QuadricLens {
  LensId id = 0;
  RigidTransform pose;
  double length = 0.25;
  double k1 = 0.0;
  double k2 = 0.0;
  bool locked = false;
  std::optional<FocusAttribute> attribute_override;

  /// Throws a validation error for length <= 0, |k| > kMaxCurvature or a
  /// non-rigid pose.
  void validate() const;
};

bool bitwise_equal(const QuadricLens& a, const QuadricLens& b);

enum class QuadricClass {
  plane,
  parabolic_cylinder,
  elliptic_paraboloid,
  rotational_paraboloid,
  hyperbolic_paraboloid,
};

std::string_view to_string(QuadricClass c) noexcept;

/// Handle kinds in tie-break order.
enum class HandleKind : std::uint8_t { origin, k1_pos, k1_neg, k2_pos, k2_neg };

inline constexpr std::array<HandleKind, 5> kAllHandleKinds{
    HandleKind::origin, HandleKind::k1_pos, HandleKind::k1_neg, HandleKind::k2_pos,
    HandleKind::k2_neg};

std::string_view to_string(HandleKind kind) noexcept;

inline bool is_curvature_handle(HandleKind kind) noexcept { return kind != HandleKind::origin; }

struct ControlPointHandle {
  LensId lens_id = 0;
  HandleKind kind = HandleKind::origin;
  Vec3 world_position = Vec3::Zero();
};

struct SurfaceHit {
  double t = 0.0;
  Vec2 uv = Vec2::Zero();
  Vec3 world_point = Vec3::Zero();
  Vec3 world_normal = Vec3::UnitZ();
};

struct LensMesh {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<Vec2> uv;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

double quadric_height(double k1, double k2, double x, double y) noexcept;

QuadricClass classify(double k1, double k2, double eps = 1e-9) noexcept;

/// Local-frame handle position (before the pose is applied).
Vec3 local_control_point(const QuadricLens& lens, HandleKind kind) noexcept;

/// origin, k1_pos, k1_neg, k2_pos, k2_neg, mapped through the pose.
std::array<ControlPointHandle, 5> control_points(const QuadricLens& lens);

/// normalize((-k1 x, -k2 y, 1)) in the local frame.
Vec3 surface_normal(double k1, double k2, double x, double y) noexcept;

/// World position of the surface point at local parameters uv.
Vec3 surface_point(const QuadricLens& lens, const Vec2& uv) noexcept;
Vec3 surface_world_normal(const QuadricLens& lens, const Vec2& uv) noexcept;

/// resolution^2 vertices on a uniform grid over [-l/2, l/2]^2 and
/// 2 (resolution-1)^2 triangles wound counter-clockwise seen from local +z.
LensMesh tessellate(const QuadricLens& lens, int resolution = kDefaultTessellation);

/// All intersections with t >= 0 inside the patch bound, ascending in t.
std::vector<SurfaceHit> ray_intersect(const QuadricLens& lens, const Ray& ray);

struct NearestHandle {
  ControlPointHandle handle;
  double distance = 0.0;
};

/// Closest handle over the unlocked lenses; ties go to the lower lens id and
/// then the earlier handle kind.
std::optional<NearestHandle> nearest_control_point(std::span<const QuadricLens> lenses,
                                                   const Vec3& p);

/// Same search but including locked lenses.
std::optional<NearestHandle> nearest_control_point_any(std::span<const QuadricLens> lenses,
                                                       const Vec3& p);

enum class CurvatureMapping {
  literal,         // dk = sensitivity * dz
  exact_tracking,  // dk chosen so the handle's local z moves by dz
};

std::string_view to_string(CurvatureMapping mapping) noexcept;
CurvatureMapping parse_curvature_mapping(std::string_view text);

struct CurvatureEdit {
  QuadricLens lens;
  bool applied = false;  // false when the origin handle was passed
};

/// Moves the curvature owning `kind` by the handle's z displacement. Both
/// handles of the mirrored pair share the result. Throws `locked` when the
/// lens is locked.
CurvatureEdit set_curvature(const QuadricLens& lens, HandleKind kind, double delta_z,
                            double sensitivity = 1.0,
                            CurvatureMapping mapping = CurvatureMapping::literal);

}  // namespace qlens
