#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qlens/geometry.hpp"
#include "qlens/quadric_lens.hpp"
#include "qlens/volume.hpp"

namespace qlens {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  bool operator==(const Rgb&) const = default;
};

struct Rgba {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  double a = 0.0;

  Rgb rgb() const { return {r, g, b}; }
  bool operator==(const Rgba&) const = default;
};

enum class Colormap { cool_to_warm, grayscale };

std::string_view to_string(Colormap colormap) noexcept;
Colormap parse_colormap(std::string_view text);

struct FocusSettings {
  int n_samples = 5;                   // odd: the stencil is symmetric about the surface
  std::optional<double> explicit_step;  // empty -> sqrt(3) / max(D)
  FocusAttribute attribute = FocusAttribute::scalar;
  Colormap colormap = Colormap::cool_to_warm;
  double ambient = 0.3;
  double diffuse = 0.7;
  Vec3 light_direction = Vec3(0.2, 0.4, 1.0).normalized();

  /// n odd and >= 1, explicit step > 0, ambient/diffuse in [0,1] with
  /// ambient + diffuse <= 1.5, light direction unit.
  void validate() const;
};

/// Normal-line sample spacing in normalized units.
double focus_step(Dims dims, const FocusSettings& settings);

/// n samples at p + (j - (n-1)/2) s n_hat, evaluated as the scalar or as its
/// gradient magnitude (raw, not rescaled).
std::vector<double> sample_along_normal(const VolumeGrid& grid, const Vec3& p, const Vec3& n_hat,
                                        const FocusSettings& settings);

/// Arithmetic mean; throws a validation error on an empty list.
double blend_samples(std::span<const double> values);

/// Clamps `value` into [0,1] and maps it.
Rgb apply_colormap(double value, Colormap colormap) noexcept;

/// base * (ambient + diffuse |n . light|), clamped. Two-sided so open lens
/// sheets are lit from either side.
Rgb shade(const Rgb& base, const Vec3& normal, const FocusSettings& settings) noexcept;

/// Blended attribute value before colormapping; gradient magnitudes are
/// divided by the grid's gradient_scale.
double focus_value(const VolumeGrid& grid, const QuadricLens& lens, const Vec2& uv,
                   const FocusSettings& settings);

/// Full focus pipeline for one surface point. Always opaque.
Rgba focus_fragment(const VolumeGrid& grid, const QuadricLens& lens, const Vec2& uv,
                    const FocusSettings& settings);

}  // namespace qlens
