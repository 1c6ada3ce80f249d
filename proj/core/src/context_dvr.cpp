#include "qlens/context_dvr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qlens/error.hpp"

namespace qlens {

void Camera::validate() const {
  if (!eye.allFinite() || !look_at.allFinite() || !up.allFinite()) {
    throw Error(ErrorKind::validation, "camera vectors must be finite");
  }
  const Vec3 view = look_at - eye;
  if (view.norm() == 0.0) throw Error(ErrorKind::validation, "camera eye equals look_at");
  if (up.cross(view).norm() <= 1e-12 * up.norm() * view.norm()) {
    throw Error(ErrorKind::validation, "camera up is parallel to the view direction");
  }
  if (!(vertical_fov > 0.0 && vertical_fov < M_PI)) {
    throw Error(ErrorKind::validation, "camera vertical_fov must lie in (0, pi)");
  }
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::validation, "camera image size must be at least 1x1");
  }
}

Ray Camera::ray(int px, int py) const {
  const Vec3 forward = (look_at - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 true_up = right.cross(forward);
  const double half_h = std::tan(0.5 * vertical_fov);
  const double half_w = half_h * static_cast<double>(width) / static_cast<double>(height);
  const double sx = (2.0 * (px + 0.5) / width - 1.0) * half_w;
  const double sy = (1.0 - 2.0 * (py + 0.5) / height) * half_h;
  return {eye, (forward + sx * right + sy * true_up).normalized()};
}

std::string_view to_string(ContextMode mode) noexcept {
  switch (mode) {
    case ContextMode::standard: return "standard";
    case ContextMode::depth_cull: return "depth_cull";
    case ContextMode::neighbor_cull: return "neighbor_cull";
  }
  return "?";
}

ContextMode parse_context_mode(std::string_view text) {
  if (text == "standard" || text == "vis1") return ContextMode::standard;
  if (text == "depth_cull" || text == "vis2") return ContextMode::depth_cull;
  if (text == "neighbor_cull" || text == "vis3") return ContextMode::neighbor_cull;
  throw Error(ErrorKind::validation, "unknown context mode '" + std::string(text) + "'");
}

ContextMode next_mode(ContextMode mode) noexcept {
  switch (mode) {
    case ContextMode::standard: return ContextMode::depth_cull;
    case ContextMode::depth_cull: return ContextMode::neighbor_cull;
    case ContextMode::neighbor_cull: return ContextMode::standard;
  }
  return ContextMode::standard;
}

TransferFunction TransferFunction::default_ramp() {
  return {{{0.0, {0.0, 0.0, 0.0}, 0.0}, {1.0, {1.0, 1.0, 1.0}, 0.05}}};
}

TransferFunction TransferFunction::transparent() {
  return {{{0.0, {0.0, 0.0, 0.0}, 0.0}, {1.0, {1.0, 1.0, 1.0}, 0.0}}};
}

void TransferFunction::validate() const {
  if (nodes.empty() || nodes.size() > kMaxTransferNodes) {
    throw Error(ErrorKind::validation, "transfer function needs 1.." +
                                           std::to_string(kMaxTransferNodes) + " nodes");
  }
  const auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (!in01(n.position) || !in01(n.opacity) || !in01(n.color.r) || !in01(n.color.g) ||
        !in01(n.color.b)) {
      throw Error(ErrorKind::validation,
                  "transfer node " + std::to_string(i) + " has a component outside [0,1]");
    }
    if (i > 0 && !(n.position > nodes[i - 1].position)) {
      throw Error(ErrorKind::validation, "transfer node positions must be strictly increasing");
    }
  }
}

TransferFunction::Sample TransferFunction::evaluate(double value) const noexcept {
  if (value <= nodes.front().position) return {nodes.front().color, nodes.front().opacity};
  if (value >= nodes.back().position) return {nodes.back().color, nodes.back().opacity};
  std::size_t hi = 1;
  while (nodes[hi].position < value) ++hi;
  const auto& a = nodes[hi - 1];
  const auto& b = nodes[hi];
  const double t = (value - a.position) / (b.position - a.position);
  return {{a.color.r + (b.color.r - a.color.r) * t, a.color.g + (b.color.g - a.color.g) * t,
           a.color.b + (b.color.b - a.color.b) * t},
          a.opacity + (b.opacity - a.opacity) * t};
}

void ContextSettings::validate() const {
  if (!(global_alpha >= 0.0 && global_alpha <= 1.0)) {
    throw Error(ErrorKind::validation, "context global_alpha must lie in [0,1]");
  }
  if (!(delta_z > 0.0)) throw Error(ErrorKind::validation, "context delta_z must be > 0");
  if (ray_step && !(*ray_step > 0.0)) {
    throw Error(ErrorKind::validation, "context ray_step must be > 0");
  }
  transfer_function.validate();
}

double context_ray_step(Dims dims, const ContextSettings& settings) noexcept {
  return settings.ray_step.value_or(0.5 / dims.max());
}

double reference_step(Dims dims) noexcept { return 1.0 / dims.max(); }

std::vector<LensHit> collect_lens_hits(std::span<const QuadricLens> lenses, const Ray& ray) {
  std::vector<LensHit> hits;
  for (std::size_t i = 0; i < lenses.size(); ++i) {
    for (const auto& h : ray_intersect(lenses[i], ray)) hits.push_back({i, h});
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const LensHit& a, const LensHit& b) { return a.hit.t < b.hit.t; });
  return hits;
}

SurfaceDepthSet surface_depth_set(std::span<const QuadricLens> lenses, const Ray& ray) {
  SurfaceDepthSet set;
  for (const auto& h : collect_lens_hits(lenses, ray)) {
    set.entries.push_back({h.hit.t, lenses[h.lens_index].id});
  }
  return set;
}

bool cull_test(double t, const SurfaceDepthSet& depths, ContextMode mode, double delta_z) noexcept {
  switch (mode) {
    case ContextMode::standard:
      return false;
    case ContextMode::depth_cull:
      return !depths.empty() && t < depths.max_depth();
    case ContextMode::neighbor_cull: {
      // entries are sorted: only the neighbours of t's insertion point matter.
      const auto& e = depths.entries;
      const auto it = std::lower_bound(e.begin(), e.end(), t,
                                       [](const DepthEntry& d, double v) { return d.t < v; });
      if (it != e.end() && std::abs(it->t - t) <= delta_z) return true;
      if (it != e.begin() && std::abs(std::prev(it)->t - t) <= delta_z) return true;
      return false;
    }
  }
  return false;
}

Rgba composite_front_to_back(std::span<const ColorSample> samples, bool early_termination) {
  Rgba acc;
  for (const auto& s : samples) {
    const double w = (1.0 - acc.a) * s.opacity;
    acc.r += w * s.color.r;
    acc.g += w * s.color.g;
    acc.b += w * s.color.b;
    acc.a += w;
    if (early_termination && acc.a >= kEarlyTerminationAlpha) break;
  }
  return acc;
}

std::vector<double> context_sample_positions(const Ray& ray, double step) {
  std::vector<double> out;
  const auto span = intersect_unit_cube(ray);
  if (!span) return out;
  const auto [t0, t1] = *span;
  const auto count = static_cast<std::size_t>(std::max(0.0, std::ceil((t1 - t0) / step - 1e-9)));
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(t0 + (static_cast<double>(i) + 0.5) * step);
  return out;
}

Rgba cast_context_ray(const VolumeGrid& grid, const Ray& ray, const ContextSettings& settings,
                      const SurfaceDepthSet& depths, const MarchOptions& options, RayStats* stats) {
  Rgba acc;
  const auto span = intersect_unit_cube(ray);
  if (!span || settings.global_alpha == 0.0) return acc;

  const double step = context_ray_step(grid.dims(), settings);
  const double exponent = step / reference_step(grid.dims());
  const auto [t0, t1] = *span;
  const auto count = static_cast<std::size_t>(std::max(0.0, std::ceil((t1 - t0) / step - 1e-9)));
  const TransferFunction& tf = settings.transfer_function;

  RayStats local;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = t0 + (static_cast<double>(i) + 0.5) * step;
    if (!(t < options.t_limit)) break;
    ++local.considered;
    if (cull_test(t, depths, settings.mode, settings.delta_z)) {
      ++local.culled;
      continue;
    }
    ++local.composited;
    const auto s = tf.evaluate(sample_trilinear(grid, ray.at(t)));
    const double alpha = s.opacity * settings.global_alpha;
    if (alpha <= 0.0) continue;
    const double corrected = 1.0 - std::pow(1.0 - alpha, exponent);
    const double w = (1.0 - acc.a) * corrected;
    acc.r += w * s.color.r;
    acc.g += w * s.color.g;
    acc.b += w * s.color.b;
    acc.a += w;
    if (options.early_termination && acc.a >= kEarlyTerminationAlpha) break;
  }
  if (stats) {
    stats->considered += local.considered;
    stats->composited += local.composited;
    stats->culled += local.culled;
  }
  return acc;
}

}  // namespace qlens
