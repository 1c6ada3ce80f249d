// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qlens/context_dvr.hpp"
#include "qlens/event_log.hpp"
#include "qlens/focus_shading.hpp"
#include "qlens/image.hpp"
#include "qlens/quadric_lens.hpp"
#include "qlens/render.hpp"
#include "qlens/scene_io.hpp"
#include "qlens/session.hpp"
#include "qlens/volume.hpp"
#include "support/oracles.hpp"

using namespace qlens;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct Criterion {
  std::string name;
  double budget_s;  // 0 = no runtime bound
  std::function<void(Outcome&)> body;
};

std::string scene_path(const char* name) { return (fs::path(QLENS_SCENES_DIR) / name).string(); }

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code = -1;
  std::string out;
  std::map<std::string, std::string> kv;
};

CliRun cli(const std::string& args) {
  CliRun r;
  FILE* pipe = popen((std::string(QLENS_CLI_PATH) + " " + args + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::istringstream in(r.out);
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) r.kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return r;
}

double max_channel_diff(const Rgba& a, const Rgba& b) {
  return std::max({std::abs(a.r - b.r), std::abs(a.g - b.g), std::abs(a.b - b.b), std::abs(a.a - b.a)});
}

QuadricLens random_lens(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> k(-kMaxCurvature, kMaxCurvature);
  std::uniform_real_distribution<double> len(0.01, 2.0);
  QuadricLens lens;
  lens.id = 1;
  lens.length = len(rng);
  lens.k1 = k(rng);
  lens.k2 = k(rng);
  return lens;
}

// ---------------------------------------------------------------------------

void geometry(Outcome& o) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> k(-5.0, 5.0);
  std::uniform_real_distribution<double> x(-1.0, 1.0);
  const double h = 1e-5;
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const double k1 = k(rng), k2 = k(rng), px = x(rng), py = x(rng);
    const double hx = (quadric_height(k1, k2, px + h, py) - quadric_height(k1, k2, px - h, py)) / (2 * h);
    const double hy = (quadric_height(k1, k2, px, py + h) - quadric_height(k1, k2, px, py - h)) / (2 * h);
    const Vec3 fd = Vec3(1, 0, hx).cross(Vec3(0, 1, hy)).normalized();
    worst = std::max(worst, (surface_normal(k1, k2, px, py) - fd).cwiseAbs().maxCoeff());
  }
  o.require(worst <= 1e-5, "normal vs finite differences");
  o.detail << "normal_max_err=" << worst << " ";

  int asym = 0;
  for (int n = 0; n < 1000; ++n) {
    const QuadricLens lens = random_lens(rng);
    const Vec3 p1 = local_control_point(lens, HandleKind::k1_pos);
    const Vec3 n1 = local_control_point(lens, HandleKind::k1_neg);
    const Vec3 p2 = local_control_point(lens, HandleKind::k2_pos);
    const Vec3 n2 = local_control_point(lens, HandleKind::k2_neg);
    const bool ok = p1.x() == -n1.x() && p1.y() == 0.0 && n1.y() == 0.0 && p1.z() == n1.z() &&
                    p2.y() == -n2.y() && p2.x() == 0.0 && n2.x() == 0.0 && p2.z() == n2.z() &&
                    local_control_point(lens, HandleKind::origin) == Vec3::Zero();
    asym += ok ? 0 : 1;
  }
  o.require(asym == 0, "control-point mirror symmetry");
  o.detail << "asymmetric=" << asym << " ";

  // Sign grid: (-, 0, +) x (-, 0, +).
  int wrong = 0;
  for (const double a : {-1.5, 0.0, 2.0}) {
    for (const double b : {-0.5, 0.0, 3.0}) {
      QuadricClass want;
      if (a == 0.0 && b == 0.0) {
        want = QuadricClass::plane;
      } else if (a == 0.0 || b == 0.0) {
        want = QuadricClass::parabolic_cylinder;
      } else if (a * b < 0.0) {
        want = QuadricClass::hyperbolic_paraboloid;
      } else {
        want = QuadricClass::elliptic_paraboloid;
      }
      wrong += classify(a, b) == want ? 0 : 1;
    }
  }
  wrong += classify(1.25, 1.25) == QuadricClass::rotational_paraboloid ? 0 : 1;
  o.require(wrong == 0, "classification sign grid");
  o.detail << "classify_wrong=" << wrong;
}

void ray_oracle(Outcome& o) {
  const auto report = oracle::ray_oracle_trial(20240601, 40, 25, 513);
  o.require(report.rays == 1000, "1000 rays");
  o.require(report.count_mismatches == 0, "hit counts outside the grazing band");
  o.require(report.max_dt <= 2e-3, "|dt| <= 2e-3");
  o.detail << "rays=" << report.rays << " hits=" << report.hits << " grazing=" << report.grazing
           << " count_mismatches=" << report.count_mismatches << " max_dt=" << report.max_dt;
}

void sampling(Outcome& o) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-0.1, 1.1);
  std::uniform_int_distribution<int> dim(2, 129);
  int mismatches = 0;
  for (int n = 0; n < 10000; ++n) {
    const Dims d{dim(rng), dim(rng), dim(rng)};
    const Vec3 p(u(rng), u(rng), u(rng));
    const auto got = voxel_index(p, d);
    for (int a = 0; a < 3; ++a) mismatches += got[a] != oracle::floor_index(p[a], d[a]) ? 1 : 0;
  }
  o.require(mismatches == 0, "voxel_index vs floor oracle");

  int step_wrong = 0;
  const FocusSettings fs;
  for (const Dims d : {Dims{256, 256, 256}, Dims{128, 256, 64}, Dims{64, 64, 64}, Dims{300, 20, 7},
                       Dims{2, 3, 500}}) {
    step_wrong += focus_step(d, fs) == std::sqrt(3.0) / std::max({d.x, d.y, d.z}) ? 0 : 1;
  }
  o.require(step_wrong == 0, "auto focus step");

  SyntheticSpec s;
  s.kind = SyntheticKind::radial_pulse;
  const Dims d{17, 23, 11};
  const auto g = generate_synthetic_volume(s, d);
  double worst = 0.0;
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        const Vec3 p((i + 0.5) / d.x, (j + 0.5) / d.y, (k + 0.5) / d.z);
        worst = std::max(worst, std::abs(sample_trilinear(g, p) - g.at(i, j, k)));
      }
  o.require(worst <= 1e-6, "trilinear at voxel centers");
  o.detail << "index_mismatches=" << mismatches << " step_wrong=" << step_wrong << " center_max_err=" << worst;
}

void compositing(Outcome& o) {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    std::vector<ColorSample> s(10);
    for (auto& x : s) x = {{u(rng), u(rng), u(rng)}, u(rng)};
    worst = std::max(worst, max_channel_diff(composite_front_to_back(s, false), oracle::composite_back_to_front(s)));
  }
  o.require(worst <= 1e-6, "front-to-back vs back-to-front");

  SyntheticSpec c;
  c.background = 1.0;
  const VolumeGrid ones = generate_synthetic_volume(c, {32, 32, 32});
  ContextSettings cs;
  cs.transfer_function = TransferFunction{{{0.0, {1, 1, 1}, 0.1}, {1.0, {1, 1, 1}, 0.1}}};
  const Rgba got = cast_context_ray(ones, Ray{{0.5, 0.5, 2.0}, {0, 0, -1}}, cs, {});
  // Unit chord at reference step 1/32: 32 reference samples of opacity 0.1.
  const double closed = 1.0 - std::pow(0.9, 32);
  const double err = std::abs(got.a - closed);
  o.require(err <= 1e-4, "constant-volume absorption");
  o.detail << "order_max_diff=" << worst << " absorption=" << got.a << " closed_form=" << closed << " err=" << err;
}

void culling(Outcome& o) {
  Scene scene = load_scene_file(scene_path("shell.json"));
  scene.camera.width = 32;
  scene.camera.height = 32;
  const VolumeGrid& grid = *scene.volume;

  for (const auto mode : {ContextMode::standard, ContextMode::depth_cull, ContextMode::neighbor_cull}) {
    scene.settings.context.mode = mode;
    const Frame frame = render_frame(scene);
    double worst = 0.0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        worst = std::max(worst, max_channel_diff(frame.at(x, y), oracle::reference_pixel(scene, scene.camera.ray(x, y))));
    o.require(worst <= 1e-5, std::string(to_string(mode)) + " vs brute force");
    o.detail << to_string(mode) << "_max_diff=" << worst << " ";
  }

  // Per-ray kept-sample accounting without early termination.
  const RenderOptions full{.threads = 1, .early_termination = false};
  int subset_violations = 0;
  std::uint64_t kept1 = 0, kept2 = 0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const Ray ray = scene.camera.ray(x, y);
      RenderStats s1, s2;
      scene.settings.context.mode = ContextMode::standard;
      (void)shade_pixel(grid, scene, ray, full, &s1);
      scene.settings.context.mode = ContextMode::depth_cull;
      (void)shade_pixel(grid, scene, ray, full, &s2);
      kept1 += s1.samples;
      kept2 += s2.samples;
      if (s2.samples > s1.samples || s2.samples + s2.culled != s1.samples) ++subset_violations;
      // Each position kept by depth culling is kept by the standard mode.
      const auto depths = surface_depth_set(scene.lenses, ray);
      for (const double t : context_sample_positions(ray, context_ray_step(grid.dims(), scene.settings.context))) {
        if (!cull_test(t, depths, ContextMode::depth_cull, scene.settings.context.delta_z) &&
            cull_test(t, depths, ContextMode::standard, scene.settings.context.delta_z)) {
          ++subset_violations;
        }
      }
    }
  }
  o.require(subset_violations == 0, "vis2 kept samples within vis1 kept samples");
  o.detail << "vis1_kept=" << kept1 << " vis2_kept=" << kept2 << " ";

  const double dz = scene.settings.context.delta_z;
  int measure_violations = 0;
  double worst_ratio = 0.0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const Ray ray = scene.camera.ray(x, y);
      const auto depths = surface_depth_set(scene.lenses, ray);
      const auto span = intersect_unit_cube(ray);
      if (!span || depths.empty()) continue;
      const double h = 2e-5;
      double measure = 0.0;
      for (double t = span->first; t < span->second; t += h) {
        if (cull_test(t + 0.5 * h, depths, ContextMode::neighbor_cull, dz)) measure += h;
      }
      const double bound = 2.0 * dz * static_cast<double>(depths.size());
      worst_ratio = std::max(worst_ratio, measure / bound);
      if (measure > bound + h) ++measure_violations;
    }
  }
  o.require(measure_violations == 0, "vis3 discarded measure");
  o.detail << "vis3_measure_over_bound_max=" << worst_ratio;
}

void determinism(Outcome& o) {
  const Scene base = parse_scene(read_text(scene_path("two_lenses.json")));
  int differing = 0;
  int log_mismatch = 0;
  std::size_t total_events = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto events = oracle::fuzz_events(1000 + seed, base, {.events = 200});
    total_events += events.size();
    SessionState a = make_session(base);
    SessionState b = make_session(base);
    for (const auto& e : events) apply_event_in_place(a, e);
    for (const auto& e : events) apply_event_in_place(b, e);
    differing += serialize_session(a) == serialize_session(b) ? 0 : 1;
    // Through the on-disk log format as well.
    SessionState c = make_session(base);
    for (const auto& e : parse_event_log(format_event_log(events))) apply_event_in_place(c, e);
    log_mismatch += serialize_session(a) == serialize_session(c) ? 0 : 1;
  }
  o.require(differing == 0, "repeat replays bitwise identical");
  o.require(log_mismatch == 0, "event-log replay identical");

  Scene locked = base;
  for (auto& lens : locked.lenses) lens.locked = true;
  oracle::FuzzOptions no_lock{.events = 200, .allow_toggle_lock = false, .allow_grip = true};
  int locked_changed = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SessionState s = make_session(locked);
    for (const auto& e : oracle::fuzz_events(5000 + seed, locked, no_lock)) apply_event_in_place(s, e);
    for (const auto& lens : locked.lenses) {
      const QuadricLens* now = s.scene.find_lens(lens.id);
      locked_changed += now && bitwise_equal(*now, lens) ? 0 : 1;
    }
  }
  o.require(locked_changed == 0, "locked lenses unchanged");

  Scene one;
  QuadricLens lens;
  lens.id = 1;
  lens.pose.translation = Vec3(0.5, 0.5, 0.5);
  one.lenses.push_back(lens);
  SessionState s = make_session(one);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  std::int64_t t = 0;
  int missed = 0;
  for (int cycle = 0; cycle < 10000; ++cycle) {
    const Vec3 grip = s.scene.lenses[0].pose.translation + Vec3(u(rng), u(rng), u(rng));
    InteractionEvent e;
    e.pose.translation = grip;
    e.pose.rotation = oracle::random_rotation(rng);
    e.timestamp_ms = t++;
    e.buttons = kTriggerPressed;
    apply_event_in_place(s, e);
    missed += s.device(Device::primary).drag ? 0 : 1;
    e.timestamp_ms = t++;
    e.buttons = 0;
    e.pose.translation = grip + Vec3(u(rng), u(rng), u(rng));
    e.pose.rotation = oracle::random_rotation(rng);
    apply_event_in_place(s, e);
    e.timestamp_ms = t++;
    e.buttons = kTriggerReleased;
    apply_event_in_place(s, e);
  }
  const double ortho = s.scene.lenses[0].pose.orthonormality_error();
  o.require(missed == 0, "every cycle grabbed the lens");
  o.require(ortho <= 1e-6, "orthonormality after 1e4 cycles");
  o.detail << "logs=100 events=" << total_events << " differing=" << differing << " locked_changed=" << locked_changed
           << " grab_cycles=10000 orthonormality_err=" << ortho;
}

void figure_analogs(Outcome& o) {
  const fs::path dir = fs::path(QLENS_TEST_TMP);
  fs::create_directories(dir);
  const int size = 128;
  std::map<std::string, long long> samples;
  std::map<std::string, std::string> images;
  for (const char* mode : {"vis1", "vis2", "vis3"}) {
    const fs::path out = dir / (std::string("shell_") + mode + ".ppm");
    const CliRun r = cli("render " + scene_path("shell.json") + " --mode " + mode + " --size " +
                         std::to_string(size) + " " + std::to_string(size) + " -o " + out.string());
    o.require(r.code == 0 && r.kv.count("samples"), std::string("render ") + mode);
    if (r.code != 0 || !r.kv.count("samples")) return;
    samples[mode] = std::stoll(r.kv.at("samples"));
    images[mode] = read_text(out);
  }

  // Marked region: the central 16x16 block, all of it on the lens.
  Scene scene = load_scene_file(scene_path("shell.json"));
  scene.camera.width = size;
  scene.camera.height = size;
  const QuadricLens& lens = scene.lenses.at(0);
  const std::size_t header = std::string("P6\n128 128\n255\n").size();
  int region = 0, vis2_focus = 0, vis1_differs = 0;
  for (int y = size / 2 - 8; y < size / 2 + 8; ++y) {
    for (int x = size / 2 - 8; x < size / 2 + 8; ++x) {
      const auto hits = ray_intersect(lens, scene.camera.ray(x, y));
      if (hits.empty()) continue;
      ++region;
      Frame one{1, 1, {focus_fragment(*scene.volume, lens, hits.front().uv, scene.settings.focus)}, {}};
      const auto want = to_rgb8(one, scene.background);
      const std::size_t at = header + 3 * (static_cast<std::size_t>(y) * size + x);
      bool same2 = true, same1 = true;
      for (int c = 0; c < 3; ++c) {
        same2 = same2 && static_cast<std::uint8_t>(images["vis2"][at + c]) == want[c];
        same1 = same1 && static_cast<std::uint8_t>(images["vis1"][at + c]) == want[c];
      }
      vis2_focus += same2 ? 1 : 0;
      vis1_differs += same1 ? 0 : 1;
    }
  }
  o.require(region == 256, "marked region lies on the lens");
  o.require(vis2_focus == region, "vis2 shows no context in front of the lens");
  o.require(vis1_differs > 0, "vis1 shows context in front of the lens");
  o.require(samples["vis1"] > samples["vis3"] && samples["vis3"] > samples["vis2"], "samples vis1 > vis3 > vis2");
  o.detail << "region=" << region << " vis2_pure_focus=" << vis2_focus << " vis1_with_context=" << vis1_differs
           << " samples_vis1=" << samples["vis1"] << " samples_vis3=" << samples["vis3"]
           << " samples_vis2=" << samples["vis2"];
}

// Pixels on a row whose normalized value lies strictly between 10% and 90%
// of the row's focus ramp.
int transition_width(const Frame& frame, int row, std::uint64_t& focus_pixels) {
  std::vector<double> v;
  for (int x = 0; x < frame.width; ++x) {
    const Rgba& p = frame.at(x, row);
    if (p.a > 0.0) v.push_back(p.r / p.a);
  }
  focus_pixels = v.size();
  if (v.empty()) return -1;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*hi - *lo <= 0.0) return -1;
  int width = 0;
  for (const double x : v) {
    const double f = (x - *lo) / (*hi - *lo);
    width += f > 0.1 && f < 0.9 ? 1 : 0;
  }
  return width;
}

void smoothing(Outcome& o) {
  Scene scene = load_scene_file(scene_path("step_edge.json"));
  const int row = scene.camera.height / 2;
  std::map<int, int> width;
  std::uint64_t focus = 0;
  for (const int n : {1, 5}) {
    scene.settings.focus.n_samples = n;
    width[n] = transition_width(render_frame(scene), row, focus);
  }
  o.require(width[1] >= 0 && width[5] >= 0, "scanline crosses the edge on the lens");
  o.require(width[5] >= width[1], "width(n=5) >= width(n=1)");
  o.detail << "row=" << row << " focus_pixels=" << focus << " width_n1=" << width[1] << " width_n5=" << width[5];
}

void performance(Outcome& o) {
  const auto start = Clock::now();
  CliRun r = cli("bench " + scene_path("bench_shell.json") + " --reps 1 --mode vis1");
  const double wall = std::chrono::duration<double>(Clock::now() - start).count();
  o.require(r.code == 0, "bench exit status");
  o.require(r.kv.count("msamples_per_s") == 1, "throughput reported");
  o.require(wall <= 60.0, "within 60 s");
  o.detail << "volume=256^3 image=" << r.kv["width"] << "x" << r.kv["height"] << " mean_ms=" << r.kv["mean_ms"]
           << " msamples_per_s=" << r.kv["msamples_per_s"] << " fps=" << r.kv["fps"] << " process_s=" << wall;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"quadric-geometry", 5.0, geometry},
      {"ray-intersection-oracle", 60.0, ray_oracle},
      {"sampling-indexing", 0.0, sampling},
      {"compositing", 0.0, compositing},
      {"culling-semantics", 120.0, culling},
      {"interaction-determinism", 0.0, determinism},
      {"figure-analogs", 0.0, figure_analogs},
      {"n5-smoothing", 0.0, smoothing},
      {"performance-report", 0.0, performance},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = Clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.budget_s > 0.0 && secs > c.budget_s) {
      o.pass = false;
      o.detail << " [over budget " << c.budget_s << " s]";
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), secs, o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
