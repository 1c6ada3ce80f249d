#include "qlens/render.hpp"

#include <algorithm>
#include <thread>

#include "qlens/error.hpp"

namespace qlens {

void RenderSettings::validate() const {
  focus.validate();
  context.validate();
  if (!std::isfinite(curvature_sensitivity)) {
    throw Error(ErrorKind::validation, "curvature sensitivity must be finite");
  }
  if (!(grab_radius > 0.0)) throw Error(ErrorKind::validation, "grab radius must be > 0");
}

const QuadricLens* Scene::find_lens(LensId id) const {
  const auto it = std::find_if(lenses.begin(), lenses.end(),
                               [id](const QuadricLens& l) { return l.id == id; });
  return it == lenses.end() ? nullptr : &*it;
}

QuadricLens* Scene::find_lens(LensId id) {
  return const_cast<QuadricLens*>(std::as_const(*this).find_lens(id));
}

Rgba shade_pixel(const VolumeGrid& grid, const Scene& scene, const Ray& ray,
                 const RenderOptions& options, RenderStats* stats) {
  const auto hits = collect_lens_hits(scene.lenses, ray);
  SurfaceDepthSet depths;
  depths.entries.reserve(hits.size());
  for (const auto& h : hits) depths.entries.push_back({h.hit.t, scene.lenses[h.lens_index].id});

  MarchOptions march;
  march.early_termination = options.early_termination;
  if (!hits.empty()) march.t_limit = hits.front().hit.t;

  RayStats ray_stats;
  Rgba out = cast_context_ray(grid, ray, scene.settings.context, depths, march, &ray_stats);

  if (!hits.empty()) {
    const auto& nearest = hits.front();
    const Rgba focus =
        focus_fragment(grid, scene.lenses[nearest.lens_index], nearest.hit.uv, scene.settings.focus);
    const double rest = 1.0 - out.a;
    out.r += rest * focus.r;
    out.g += rest * focus.g;
    out.b += rest * focus.b;
    out.a = 1.0;
  }
  if (stats) {
    ++stats->rays;
    stats->samples += ray_stats.composited;
    stats->culled += ray_stats.culled;
    if (!hits.empty()) ++stats->focus_pixels;
  }
  return out;
}

Frame render_frame(const Scene& scene, const Camera& camera, const RenderOptions& options) {
  if (!scene.volume) throw Error(ErrorKind::structural, "scene has no loaded volume");
  camera.validate();
  const VolumeGrid& grid = *scene.volume;

  Frame frame;
  frame.width = camera.width;
  frame.height = camera.height;
  frame.pixels.resize(static_cast<std::size_t>(camera.width) * static_cast<std::size_t>(camera.height));

  unsigned workers = options.threads > 0 ? static_cast<unsigned>(options.threads)
                                         : std::max(1U, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(camera.height));
  std::vector<RenderStats> partial(workers);

  // Worker w owns rows w, w + workers, ...; no two workers touch the same pixel.
  const auto run = [&](unsigned w) {
    for (int y = static_cast<int>(w); y < camera.height; y += static_cast<int>(workers)) {
      for (int x = 0; x < camera.width; ++x) {
        frame.pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(camera.width) +
                     static_cast<std::size_t>(x)] =
            shade_pixel(grid, scene, camera.ray(x, y), options, &partial[w]);
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }

  for (const auto& p : partial) {
    frame.stats.rays += p.rays;
    frame.stats.samples += p.samples;
    frame.stats.culled += p.culled;
    frame.stats.focus_pixels += p.focus_pixels;
  }
  frame.stats.pixels = frame.pixels.size();
  return frame;
}

}  // namespace qlens
