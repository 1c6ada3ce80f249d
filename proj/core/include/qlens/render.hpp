#pragma once

#include <cstdint>
#include <vector>

#include "qlens/context_dvr.hpp"
#include "qlens/scene.hpp"

namespace qlens {

struct RenderStats {
  std::uint64_t pixels = 0;
  std::uint64_t rays = 0;
  std::uint64_t samples = 0;  // composited context samples
  std::uint64_t culled = 0;
  std::uint64_t focus_pixels = 0;
};

/// Premultiplied RGBA per pixel, row-major from the top row.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<Rgba> pixels;
  RenderStats stats;

  const Rgba& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

struct RenderOptions {
  int threads = 0;  // 0 -> hardware concurrency
  bool early_termination = true;
};

/// Shades one primary ray: context in front of the nearest lens hit is
/// composited over that hit's opaque focus color; without a hit the ray is
/// pure context.
Rgba shade_pixel(const VolumeGrid& grid, const Scene& scene, const Ray& ray,
                 const RenderOptions& options = {}, RenderStats* stats = nullptr);

/// Throws a structural error when the scene has no loaded volume.
Frame render_frame(const Scene& scene, const Camera& camera, const RenderOptions& options = {});
inline Frame render_frame(const Scene& scene) { return render_frame(scene, scene.camera); }

}  // namespace qlens
