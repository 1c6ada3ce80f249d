#include "qlens/focus_shading.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "qlens/error.hpp"

namespace qlens {
namespace {

constexpr Rgb kCoolAnchor{0.230, 0.299, 0.754};
constexpr Rgb kMidAnchor{0.865, 0.865, 0.865};
constexpr Rgb kWarmAnchor{0.706, 0.016, 0.150};

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

FocusAttribute effective_attribute(const QuadricLens& lens, const FocusSettings& settings) {
  return lens.attribute_override.value_or(settings.attribute);
}

}  // namespace

std::string_view to_string(Colormap colormap) noexcept {
  return colormap == Colormap::cool_to_warm ? "cool_to_warm" : "grayscale";
}

Colormap parse_colormap(std::string_view text) {
  if (text == "cool_to_warm") return Colormap::cool_to_warm;
  if (text == "grayscale") return Colormap::grayscale;
  throw Error(ErrorKind::validation, "unknown colormap '" + std::string(text) + "'");
}

void FocusSettings::validate() const {
  if (n_samples < 1 || n_samples % 2 == 0) {
    throw Error(ErrorKind::validation,
                "focus n_samples must be an odd integer >= 1 (got " + std::to_string(n_samples) + ")");
  }
  if (explicit_step && !(*explicit_step > 0.0)) {
    throw Error(ErrorKind::validation, "focus step must be > 0");
  }
  if (!(ambient >= 0.0 && ambient <= 1.0) || !(diffuse >= 0.0 && diffuse <= 1.0) ||
      ambient + diffuse > 1.5) {
    throw Error(ErrorKind::validation,
                "focus lighting requires ambient, diffuse in [0,1] and ambient + diffuse <= 1.5");
  }
  if (!light_direction.allFinite() || std::abs(light_direction.norm() - 1.0) > 1e-6) {
    throw Error(ErrorKind::validation, "focus light_direction must be a unit vector");
  }
}

double focus_step(Dims dims, const FocusSettings& settings) {
  if (settings.explicit_step) {
    if (!(*settings.explicit_step > 0.0)) {
      throw Error(ErrorKind::validation, "focus step must be > 0");
    }
    return *settings.explicit_step;
  }
  return std::sqrt(3.0) / dims.max();
}

std::vector<double> sample_along_normal(const VolumeGrid& grid, const Vec3& p, const Vec3& n_hat,
                                        const FocusSettings& settings) {
  const double s = focus_step(grid.dims(), settings);
  const int n = settings.n_samples;
  const double center = 0.5 * (n - 1);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const Vec3 q = p + ((j - center) * s) * n_hat;
    out.push_back(settings.attribute == FocusAttribute::scalar ? sample_trilinear(grid, q)
                                                               : gradient_magnitude(grid, q));
  }
  return out;
}

double blend_samples(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::validation, "cannot blend an empty sample list");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

Rgb apply_colormap(double value, Colormap colormap) noexcept {
  const double v = std::isnan(value) ? 0.0 : clamp01(value);
  if (colormap == Colormap::grayscale) return {v, v, v};
  if (v <= 0.5) return lerp(kCoolAnchor, kMidAnchor, v / 0.5);
  return lerp(kMidAnchor, kWarmAnchor, (v - 0.5) / 0.5);
}

Rgb shade(const Rgb& base, const Vec3& normal, const FocusSettings& settings) noexcept {
  const double lambert = std::abs(normal.dot(settings.light_direction));
  const double k = settings.ambient + settings.diffuse * lambert;
  return {clamp01(base.r * k), clamp01(base.g * k), clamp01(base.b * k)};
}

double focus_value(const VolumeGrid& grid, const QuadricLens& lens, const Vec2& uv,
                   const FocusSettings& settings) {
  FocusSettings effective = settings;
  effective.attribute = effective_attribute(lens, settings);
  const Vec3 p = surface_point(lens, uv);
  const Vec3 n = surface_world_normal(lens, uv);
  const auto samples = sample_along_normal(grid, p, n, effective);
  const double blended = blend_samples(samples);
  if (effective.attribute == FocusAttribute::gradient_magnitude) {
    return blended / grid.gradient_scale();
  }
  return blended;
}

Rgba focus_fragment(const VolumeGrid& grid, const QuadricLens& lens, const Vec2& uv,
                    const FocusSettings& settings) {
  const double value = focus_value(grid, lens, uv, settings);
  const Rgb base = apply_colormap(value, settings.colormap);
  const Rgb lit = shade(base, surface_world_normal(lens, uv), settings);
  return {lit.r, lit.g, lit.b, 1.0};
}

}  // namespace qlens
