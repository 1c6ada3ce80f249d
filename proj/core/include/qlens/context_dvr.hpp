#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qlens/focus_shading.hpp"
#include "qlens/geometry.hpp"
#include "qlens/quadric_lens.hpp"
#include "qlens/volume.hpp"

namespace qlens {

/// Accumulated opacity at which a ray stops marching.
inline constexpr double kEarlyTerminationAlpha = 0.99;
inline constexpr std::size_t kMaxTransferNodes = 16;

struct Camera {
  Vec3 eye{0.5, 0.5, 2.2};
  Vec3 look_at{0.5, 0.5, 0.5};
  Vec3 up{0.0, 1.0, 0.0};
  double vertical_fov = 0.7;  // radians
  int width = 256;
  int height = 256;

  void validate() const;

  /// Primary ray through the center of pixel (px, py); row 0 is the top.
  Ray ray(int px, int py) const;
};

enum class ContextMode { standard, depth_cull, neighbor_cull };

std::string_view to_string(ContextMode mode) noexcept;
/// Accepts "standard|depth_cull|neighbor_cull" and the "vis1|vis2|vis3" aliases.
ContextMode parse_context_mode(std::string_view text);
ContextMode next_mode(ContextMode mode) noexcept;

struct TransferNode {
  double position = 0.0;
  Rgb color;
  double opacity = 0.0;

  bool operator==(const TransferNode&) const = default;
};

/// Piecewise-linear scalar -> (color, opacity), constant beyond the end nodes.
struct TransferFunction {
  std::vector<TransferNode> nodes;

  /// Grayscale ramp, opacity 0 -> 0.05.
  static TransferFunction default_ramp();
  static TransferFunction transparent();

  void validate() const;

  struct Sample {
    Rgb color;
    double opacity = 0.0;
  };
  Sample evaluate(double value) const noexcept;
};

struct ContextSettings {
  ContextMode mode = ContextMode::standard;
  double global_alpha = 1.0;
  double delta_z = 0.01;
  std::optional<double> ray_step;  // empty -> 1 / (2 max(D))
  TransferFunction transfer_function = TransferFunction::default_ramp();

  void validate() const;
};

/// Marching step and the reference step the opacity correction is relative to.
double context_ray_step(Dims dims, const ContextSettings& settings) noexcept;
double reference_step(Dims dims) noexcept;

struct DepthEntry {
  double t = 0.0;
  LensId lens_id = 0;
};

/// Ascending lens hit depths along one ray.
struct SurfaceDepthSet {
  std::vector<DepthEntry> entries;

  bool empty() const noexcept { return entries.empty(); }
  std::size_t size() const noexcept { return entries.size(); }
  double max_depth() const noexcept { return entries.back().t; }
};

struct LensHit {
  std::size_t lens_index = 0;
  SurfaceHit hit;
};

/// Every lens hit along the ray, ascending by t (ties: lens order).
std::vector<LensHit> collect_lens_hits(std::span<const QuadricLens> lenses, const Ray& ray);

SurfaceDepthSet surface_depth_set(std::span<const QuadricLens> lenses, const Ray& ray);

/// true = discard the context sample at ray parameter t.
bool cull_test(double t, const SurfaceDepthSet& depths, ContextMode mode, double delta_z) noexcept;

struct ColorSample {
  Rgb color;
  double opacity = 0.0;
};

/// C += (1-A) a c, A += (1-A) a. The returned color is premultiplied.
Rgba composite_front_to_back(std::span<const ColorSample> samples, bool early_termination = true);

struct RayStats {
  std::uint64_t considered = 0;  // sample positions visited
  std::uint64_t composited = 0;  // samples that passed the cull test
  std::uint64_t culled = 0;
};

struct MarchOptions {
  double t_limit = std::numeric_limits<double>::infinity();  // exclusive
  bool early_termination = true;
};

/// Sample parameters along `ray` inside the unit cube: t0 + (i + 1/2) step
/// for i < ceil((t1 - t0) / step).
std::vector<double> context_sample_positions(const Ray& ray, double step);

/// Marches the context volume and returns a premultiplied color.
Rgba cast_context_ray(const VolumeGrid& grid, const Ray& ray, const ContextSettings& settings,
                      const SurfaceDepthSet& depths, const MarchOptions& options = {},
                      RayStats* stats = nullptr);

}  // namespace qlens
