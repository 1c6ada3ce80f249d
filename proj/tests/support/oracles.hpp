// Test-only reference implementations. Each one takes a different route from
// the engine code it is compared against.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "qlens/context_dvr.hpp"
#include "qlens/render.hpp"
#include "qlens/quadric_lens.hpp"
#include "qlens/session.hpp"
#include "qlens/volume.hpp"

namespace qlens::oracle {

/// Largest i in [0, n-1] with i <= p*n, found by linear search.
inline int floor_index(double p, int n) {
  const double scaled = p * n;
  int best = 0;
  for (int i = 0; i < n; ++i) {
    if (static_cast<double>(i) <= scaled) best = i;
  }
  return best;
}

/// Moller-Trumbore against every triangle of a tessellation. Hits closer
/// than `merge` in t (shared edges and vertices) are reported once.
inline std::vector<double> mesh_hits(const LensMesh& mesh, const Ray& ray, double merge = 1e-9) {
  std::vector<double> ts;
  const Vec3& o = ray.origin;
  const Vec3& d = ray.direction;
  for (const auto& tri : mesh.triangles) {
    const Vec3& a = mesh.positions[tri[0]];
    const Vec3 e1 = mesh.positions[tri[1]] - a;
    const Vec3 e2 = mesh.positions[tri[2]] - a;
    const Vec3 p = d.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-300) continue;
    const double inv = 1.0 / det;
    const Vec3 s = o - a;
    const double u = s.dot(p) * inv;
    if (u < -1e-12 || u > 1.0 + 1e-12) continue;
    const Vec3 q = s.cross(e1);
    const double v = d.dot(q) * inv;
    if (v < -1e-12 || u + v > 1.0 + 1e-12) continue;
    const double t = e2.dot(q) * inv;
    if (t >= 0.0) ts.push_back(t);
  }
  std::sort(ts.begin(), ts.end());
  std::vector<double> merged;
  for (const double t : ts) {
    if (merged.empty() || t - merged.back() > merge) merged.push_back(t);
  }
  return merged;
}

/// Over operator applied from the far end: C = a c + (1-a) C.
inline Rgba composite_back_to_front(const std::vector<ColorSample>& samples) {
  Rgba acc;
  for (auto it = samples.rbegin(); it != samples.rend(); ++it) {
    const double a = it->opacity;
    acc.r = a * it->color.r + (1.0 - a) * acc.r;
    acc.g = a * it->color.g + (1.0 - a) * acc.g;
    acc.b = a * it->color.b + (1.0 - a) * acc.b;
    acc.a = a + (1.0 - a) * acc.a;
  }
  return acc;
}

/// Piecewise-linear transfer lookup by scanning segments.
inline TransferFunction::Sample transfer_lookup(const TransferFunction& tf, double v) {
  const auto& n = tf.nodes;
  if (v <= n.front().position) return {n.front().color, n.front().opacity};
  for (std::size_t i = 1; i < n.size(); ++i) {
    if (v <= n[i].position) {
      const double w = (v - n[i - 1].position) / (n[i].position - n[i - 1].position);
      const auto mix = [w](double a, double b) { return (1.0 - w) * a + w * b; };
      return {{mix(n[i - 1].color.r, n[i].color.r), mix(n[i - 1].color.g, n[i].color.g),
               mix(n[i - 1].color.b, n[i].color.b)},
              mix(n[i - 1].opacity, n[i].opacity)};
    }
  }
  return {n.back().color, n.back().opacity};
}

/// Literal per-ray reference: enumerate every sample in the cube, keep the
/// ones the mode rule allows in front of the nearest lens, then apply the
/// over operator from the back with the focus color as the farthest layer.
inline Rgba reference_pixel(const Scene& scene, const Ray& ray) {
  const VolumeGrid& grid = *scene.volume;
  const ContextSettings& cs = scene.settings.context;
  std::vector<double> depths;
  double nearest = std::numeric_limits<double>::infinity();
  const QuadricLens* nearest_lens = nullptr;
  Vec2 nearest_uv = Vec2::Zero();
  for (const auto& lens : scene.lenses) {
    for (const auto& h : ray_intersect(lens, ray)) {
      depths.push_back(h.t);
      if (h.t < nearest) {
        nearest = h.t;
        nearest_lens = &lens;
        nearest_uv = h.uv;
      }
    }
  }
  const double farthest = depths.empty() ? -1.0 : *std::max_element(depths.begin(), depths.end());

  std::vector<ColorSample> layers;
  const double step = cs.ray_step.value_or(1.0 / (2.0 * grid.dims().max()));
  const double ref = 1.0 / grid.dims().max();
  if (const auto span = intersect_unit_cube(ray); span && cs.global_alpha > 0.0) {
    const double t0 = span->first;
    for (int i = 0;; ++i) {
      if (static_cast<double>(i) >= (span->second - t0) / step - 1e-9) break;
      const double t = t0 + (i + 0.5) * step;
      if (t >= nearest) break;
      bool keep = true;
      if (cs.mode == ContextMode::depth_cull) keep = !(t < farthest);
      if (cs.mode == ContextMode::neighbor_cull) {
        for (const double d : depths) keep = keep && std::abs(t - d) > cs.delta_z;
      }
      if (!keep) continue;
      const auto s = transfer_lookup(cs.transfer_function, sample_trilinear(grid, ray.at(t)));
      const double a = 1.0 - std::pow(1.0 - s.opacity * cs.global_alpha, step / ref);
      layers.push_back({s.color, a});
    }
  }
  if (nearest_lens != nullptr) {
    const Rgba f = focus_fragment(grid, *nearest_lens, nearest_uv, scene.settings.focus);
    layers.push_back({f.rgb(), 1.0});
  }
  return composite_back_to_front(layers);
}

/// Midpoint-rule area of z = (k1 x^2 + k2 y^2)/2 over [-l/2, l/2]^2.
inline double quadric_area(double k1, double k2, double l, int cells = 2000) {
  const double h = l / cells;
  double sum = 0.0;
  for (int j = 0; j < cells; ++j) {
    const double y = -0.5 * l + (j + 0.5) * h;
    for (int i = 0; i < cells; ++i) {
      const double x = -0.5 * l + (i + 0.5) * h;
      sum += std::sqrt(1.0 + k1 * k1 * x * x + k2 * k2 * y * y);
    }
  }
  return sum * h * h;
}

inline double mesh_area(const LensMesh& mesh) {
  double area = 0.0;
  for (const auto& tri : mesh.triangles) {
    const Vec3 e1 = mesh.positions[tri[1]] - mesh.positions[tri[0]];
    const Vec3 e2 = mesh.positions[tri[2]] - mesh.positions[tri[0]];
    area += 0.5 * e1.cross(e2).norm();
  }
  return area;
}

inline Quat random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

/// True when the ray comes within `band` of a tangency, of the patch rim or
/// hits nearly edge-on; hit counts there legitimately depend on the mesh.
inline bool grazing(const QuadricLens& lens, const Ray& ray, double band) {
  const RigidTransform inv = lens.pose.inverse();
  const Vec3 o = inv.apply_point(ray.origin);
  const Vec3 d = inv.apply_vector(ray.direction);
  const double half = 0.5 * lens.length;
  // g(t) = h(x(t), y(t)) - z(t) is quadratic in t.
  const auto g = [&](double t) {
    const Vec3 p = o + t * d;
    return 0.5 * (lens.k1 * p.x() * p.x() + lens.k2 * p.y() * p.y()) - p.z();
  };
  const auto inside = [&](double t, double slack) {
    const Vec3 p = o + t * d;
    return std::abs(p.x()) <= half + slack && std::abs(p.y()) <= half + slack;
  };
  const double a = 0.5 * (lens.k1 * d.x() * d.x() + lens.k2 * d.y() * d.y());
  if (std::abs(a) > 1e-15) {
    const double b = lens.k1 * o.x() * d.x() + lens.k2 * o.y() * d.y() - d.z();
    const double t_star = -b / (2.0 * a);
    if (t_star >= 0.0 && inside(t_star, band) && std::abs(g(t_star)) < band) return true;
  }
  // Rim crossings: wherever the ray crosses x = +-l/2 or y = +-l/2 close to the surface.
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) continue;
    for (const double side : {-half, half}) {
      const double t = (side - o[axis]) / d[axis];
      if (t >= 0.0 && inside(t, band) && std::abs(g(t)) < band * (1.0 + std::abs(lens.k1) + std::abs(lens.k2))) {
        return true;
      }
    }
  }
  for (const auto& hit : ray_intersect(lens, ray)) {
    if (std::abs(hit.world_normal.dot(ray.direction)) < band) return true;
    if (half - std::abs(hit.uv.x()) < band || half - std::abs(hit.uv.y()) < band) return true;
  }
  return false;
}

struct RayOracleReport {
  int rays = 0;
  int grazing = 0;
  int count_mismatches = 0;
  double max_dt = 0.0;
  int hits = 0;
};

/// Random lenses and rays aimed through their patch bound, compared against
/// a brute-force march over a fine tessellation.
inline RayOracleReport ray_oracle_trial(std::uint64_t seed, int lenses, int rays_per_lens,
                                        int resolution, double band = 1e-3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RayOracleReport report;
  for (int li = 0; li < lenses; ++li) {
    QuadricLens lens;
    lens.id = static_cast<LensId>(li + 1);
    lens.length = 0.2 + 0.8 * unit(rng);
    lens.k1 = 5.0 * u(rng);
    lens.k2 = 5.0 * u(rng);
    lens.pose.rotation = random_rotation(rng);
    lens.pose.translation = Vec3(unit(rng), unit(rng), unit(rng));
    const LensMesh mesh = tessellate(lens, resolution);
    for (int ri = 0; ri < rays_per_lens; ++ri) {
      // Target a point on or near the patch, come from a random direction.
      const double half = 0.5 * lens.length;
      const double x = 1.2 * half * u(rng);
      const double y = 1.2 * half * u(rng);
      const Vec3 target = lens.pose.apply_point(Vec3(x, y, quadric_height(lens.k1, lens.k2, x, y) + 0.1 * half * u(rng)));
      Vec3 dir(u(rng), u(rng), u(rng));
      if (dir.norm() < 1e-3) dir = Vec3::UnitZ();
      dir.normalize();
      Ray ray{target - 3.0 * dir, dir};
      ++report.rays;
      if (grazing(lens, ray, band)) {
        ++report.grazing;
        continue;
      }
      const auto analytic = ray_intersect(lens, ray);
      const auto brute = mesh_hits(mesh, ray, 1e-7);
      if (analytic.size() != brute.size()) {
        ++report.count_mismatches;
        continue;
      }
      for (std::size_t h = 0; h < analytic.size(); ++h) {
        report.max_dt = std::max(report.max_dt, std::abs(analytic[h].t - brute[h]));
        ++report.hits;
      }
    }
  }
  return report;
}

struct FuzzOptions {
  std::size_t events = 200;
  bool allow_toggle_lock = true;
  bool allow_grip = true;
};

/// Random but well-formed controller traffic that repeatedly steers the
/// controllers onto existing handles so grabs, scales and bends happen.
inline std::vector<InteractionEvent> fuzz_events(std::uint64_t seed, const Scene& initial,
                                                 const FuzzOptions& options = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-0.03, 0.03);
  std::vector<Vec3> anchors;
  for (const auto& lens : initial.lenses) {
    for (const auto& h : control_points(lens)) anchors.push_back(h.world_position);
  }
  std::vector<InteractionEvent> out;
  std::int64_t ts = 0;
  std::array<RigidTransform, 2> pose{};
  pose[0].translation = Vec3(0.4, 0.5, 0.5);
  pose[1].translation = Vec3(0.6, 0.5, 0.5);
  for (std::size_t i = 0; i < options.events; ++i) {
    InteractionEvent e;
    ts += static_cast<std::int64_t>(rng() % 20);
    e.timestamp_ms = ts;
    e.device = (rng() % 3 == 0) ? Device::secondary : Device::primary;
    auto& p = pose[static_cast<std::size_t>(e.device)];
    const double r = unit(rng);
    if (r < 0.25 && !anchors.empty()) {
      p.translation = anchors[rng() % anchors.size()] + Vec3(jitter(rng), jitter(rng), jitter(rng)) * 0.5;
    } else if (r < 0.35) {
      p.translation = Vec3(unit(rng), unit(rng), unit(rng));
    } else {
      p.translation += Vec3(jitter(rng), jitter(rng), jitter(rng));
    }
    if (unit(rng) < 0.2) p.rotation = random_rotation(rng);
    e.pose = p;
    const double b = unit(rng);
    if (b < 0.05 && options.allow_grip) {
      e.buttons = kGripPressed;
    } else if (b < 0.25) {
      e.buttons = kTriggerPressed;
    } else if (b < 0.40) {
      e.buttons = kTriggerReleased;
    } else if (b < 0.43) {
      e.buttons = kToggleAttribute;
    } else if (b < 0.46) {
      e.buttons = kCycleMode;
    } else if (b < 0.50 && options.allow_toggle_lock) {
      e.buttons = kToggleLock;
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace qlens::oracle
