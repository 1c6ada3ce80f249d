// qlens: generate volumes, render scenes, replay event logs, benchmark,
// validate files and serve a session to a remote viewer.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qlens/error.hpp"
#include "qlens/event_log.hpp"
#include "qlens/image.hpp"
#include "qlens/protocol.hpp"
#include "qlens/render.hpp"
#include "qlens/scene_io.hpp"
#include "qlens/session.hpp"
#include "qlens/volume.hpp"

namespace fs = std::filesystem;
using namespace qlens;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

// Flags shared by render, replay and bench.
struct ViewOverrides {
  std::string mode;
  std::vector<int> size;
  int n_samples = 0;
  int threads = 0;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--mode", mode, "Context mode: vis1|vis2|vis3 (or standard|depth_cull|neighbor_cull)");
    cmd.add_option("--size", size, "Image size W H")->expected(2);
    cmd.add_option("--n-samples", n_samples, "Focus stencil size (odd)")->check(CLI::PositiveNumber);
    cmd.add_option("--threads", threads, "Render threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  }

  void apply(Scene& scene) const {
    if (!mode.empty()) scene.settings.context.mode = parse_context_mode(mode);
    if (size.size() == 2) {
      scene.camera.width = size[0];
      scene.camera.height = size[1];
      scene.camera.validate();
    }
    if (n_samples > 0) {
      scene.settings.focus.n_samples = n_samples;
      scene.settings.focus.validate();
    }
  }

  RenderOptions options() const { return RenderOptions{.threads = threads}; }
};

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void print_stats(const RenderStats& s, double wall_ms) {
  std::cout << "pixels=" << s.pixels << " rays=" << s.rays << " samples=" << s.samples
            << " wall_ms=" << fixed(wall_ms) << " culled=" << s.culled
            << " focus_pixels=" << s.focus_pixels << "\n";
}

// gen-volume ---------------------------------------------------------------

struct GenVolumeArgs {
  std::string kind = "sphere_shell";
  std::optional<double> value;
  std::vector<double> center;
  std::optional<double> radius, width, amplitude, background, position;
  std::optional<int> axis;
  std::vector<int> dims{64, 64, 64};
  std::string dtype = "f32le";
  std::string out;
};

void run_gen_volume(const GenVolumeArgs& a) {
  SyntheticSpec spec;
  spec.kind = parse_synthetic_kind(a.kind);
  if (a.value) {
    if (spec.kind != SyntheticKind::constant) {
      throw Error(ErrorKind::validation, "--value applies only to --kind constant");
    }
    spec.background = *a.value;
  }
  if (a.center.size() == 3) spec.center = Vec3(a.center[0], a.center[1], a.center[2]);
  if (a.radius) spec.radius = *a.radius;
  if (a.width) spec.width = *a.width;
  if (a.amplitude) spec.amplitude = *a.amplitude;
  if (a.background) spec.background = *a.background;
  if (a.axis) spec.axis = *a.axis;
  if (a.position) spec.position = *a.position;

  const Dims dims{a.dims[0], a.dims[1], a.dims[2]};
  const VolumeGrid grid = generate_synthetic_volume(spec, dims);
  write_qvol(a.out, grid, parse_encoding(a.dtype));
  const ValueRange raw = grid.raw_range();
  std::cout << "dims=" << dims.x << " " << dims.y << " " << dims.z << " voxels=" << dims.count()
            << " range=" << shortest(raw.min) << " " << shortest(raw.max) << " path=" << a.out
            << "\n";
}

// render -------------------------------------------------------------------

void run_render(const std::string& scene_path, const ViewOverrides& view, const std::string& out) {
  Scene scene = load_scene_file(scene_path);
  view.apply(scene);
  const auto start = Clock::now();
  const Frame frame = render_frame(scene, scene.camera, view.options());
  const double ms = elapsed_ms(start);
  write_image(out, frame, scene.background);
  print_stats(frame.stats, ms);
}

// replay -------------------------------------------------------------------

void run_replay(const std::string& scene_path, const std::string& log_path, const ViewOverrides& view,
                const std::string& out_dir, int every, const std::string& ext) {
  Scene scene = load_scene_file(scene_path);
  view.apply(scene);
  // Keep a relative volume path usable from the output directory.
  if (!scene.volume_source.path.empty() && fs::path(scene.volume_source.path).is_relative()) {
    scene.volume_source.path =
        fs::absolute(fs::path(scene_path).parent_path() / scene.volume_source.path).lexically_normal().string();
  }
  const auto events = load_event_log(log_path);
  fs::create_directories(out_dir);

  SessionState state = make_session(std::move(scene));
  const RenderOptions options = view.options();
  std::size_t frames = 0;
  RenderStats total;
  const auto emit = [&](std::size_t applied) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06zu.%s", applied, ext.c_str());
    const Frame frame = render_frame(state.scene, state.scene.camera, options);
    write_image(fs::path(out_dir) / name, frame, state.scene.background);
    total.pixels += frame.stats.pixels;
    total.samples += frame.stats.samples;
    ++frames;
  };

  const auto start = Clock::now();
  std::size_t ignored = 0;
  bool last_rendered = false;
  for (std::size_t i = 0; i < events.size(); ++i) {
    apply_event_in_place(state, events[i]);
    if (state.notice) ++ignored;
    last_rendered = every > 0 && (i + 1) % static_cast<std::size_t>(every) == 0;
    if (last_rendered) emit(i + 1);
  }
  if (!last_rendered) emit(events.size());
  save_scene_file(fs::path(out_dir) / "final_scene.json", state.scene);

  std::cout << "events=" << events.size() << " ignored=" << ignored << " frames=" << frames
            << " lenses=" << state.scene.lenses.size() << " version=" << state.version
            << " samples=" << total.samples << " wall_ms=" << fixed(elapsed_ms(start)) << "\n";
}

// bench --------------------------------------------------------------------

void run_bench(const std::string& scene_path, const ViewOverrides& view, int reps) {
  Scene scene = load_scene_file(scene_path);
  view.apply(scene);
  std::vector<double> times;
  std::uint64_t samples = 0;
  for (int r = 0; r < reps; ++r) {
    const auto start = Clock::now();
    const Frame frame = render_frame(scene, scene.camera, view.options());
    times.push_back(elapsed_ms(start));
    samples = frame.stats.samples;
  }
  const double mean = std::accumulate(times.begin(), times.end(), 0.0) / reps;
  const auto [mn, mx] = std::minmax_element(times.begin(), times.end());
  std::cout << "reps=" << reps << " width=" << scene.camera.width << " height=" << scene.camera.height
            << " mode=" << to_string(scene.settings.context.mode) << " samples=" << samples
            << " mean_ms=" << fixed(mean) << " min_ms=" << fixed(*mn) << " max_ms=" << fixed(*mx)
            << " msamples_per_s=" << fixed(mean > 0.0 ? samples / (mean * 1e3) : 0.0)
            << " fps=" << fixed(mean > 0.0 ? 1e3 / mean : 0.0, 2) << "\n";
}

// validate -----------------------------------------------------------------

void run_validate(const std::vector<std::string>& paths) {
  for (const auto& p : paths) {
    const std::string ext = fs::path(p).extension().string();
    if (ext == ".json") {
      const Scene s = load_scene_file(p);
      std::cout << "valid=" << p << " type=scene lenses=" << s.lenses.size() << "\n";
    } else if (ext == ".qvol") {
      const VolumeGrid g = load_qvol(p);
      std::cout << "valid=" << p << " type=volume dims=" << g.dims().x << " " << g.dims().y << " "
                << g.dims().z << "\n";
    } else if (ext == ".csv" || ext == ".log") {
      const auto events = load_event_log(p);
      std::cout << "valid=" << p << " type=events events=" << events.size() << "\n";
    } else {
      throw Error(ErrorKind::unsupported_format, "cannot tell the file type of '" + p + "' (.json, .qvol, .csv)");
    }
  }
}

// serve --------------------------------------------------------------------

void run_serve(const std::string& scene_path, const std::string& socket_path, std::size_t max_connections,
               const std::string& log_out, const std::string& scene_out, int threads) {
  protocol::EngineEndpoint endpoint(make_session(load_scene_file(scene_path)), RenderOptions{.threads = threads});
  std::cout << "listening=" << socket_path << std::endl;
  protocol::serve_unix_socket(socket_path, endpoint, max_connections);
  if (!log_out.empty()) save_event_log(log_out, endpoint.applied_events());
  if (!scene_out.empty()) save_scene_file(scene_out, endpoint.state().scene);
  std::cout << "events=" << endpoint.applied_events().size() << " version=" << endpoint.state().version << "\n";
}

std::string quoted(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::string out = "\"";
  for (const char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

int fail(std::string_view kind, const std::string& message, int code) {
  std::cerr << "error kind=" << kind << " message=" << quoted(message) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qlens: quadric lens focus+context volume renderer"};
  app.require_subcommand(1, 1);

  GenVolumeArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-volume", "Write a synthetic QVOL volume");
  gen_cmd->add_option("--kind", gen.kind, "constant|axis_linear|sphere_shell|radial_pulse|step_edge");
  gen_cmd->add_option("--value", gen.value, "Level of a constant field");
  gen_cmd->add_option("--center", gen.center, "Shell or pulse center")->expected(3);
  gen_cmd->add_option("--radius", gen.radius);
  gen_cmd->add_option("--width", gen.width);
  gen_cmd->add_option("--amplitude", gen.amplitude);
  gen_cmd->add_option("--background", gen.background);
  gen_cmd->add_option("--axis", gen.axis);
  gen_cmd->add_option("--position", gen.position, "Step position along --axis");
  gen_cmd->add_option("--dims", gen.dims, "Grid size Dx Dy Dz")->expected(3);
  gen_cmd->add_option("--dtype", gen.dtype, "u8|u16le|f32le");
  gen_cmd->add_option("-o,--output", gen.out)->required();

  std::string scene_path, out_path, log_path, out_dir = "replay_out", ext = "png";
  ViewOverrides view;
  int every = 1;
  int reps = 5;

  auto* render_cmd = app.add_subcommand("render", "Render a scene to PNG or PPM");
  render_cmd->add_option("scene", scene_path)->required();
  render_cmd->add_option("-o,--output", out_path)->required();
  view.add_to(*render_cmd);

  auto* replay_cmd = app.add_subcommand("replay", "Apply an event log and render the session");
  replay_cmd->add_option("scene", scene_path)->required();
  replay_cmd->add_option("events", log_path)->required();
  replay_cmd->add_option("--out-dir", out_dir);
  replay_cmd->add_option("--every", every, "Render after every k-th event (0 = final only)")
      ->check(CLI::NonNegativeNumber);
  replay_cmd->add_option("--format", ext)->check(CLI::IsMember({"png", "ppm"}));
  view.add_to(*replay_cmd);

  auto* bench_cmd = app.add_subcommand("bench", "Time repeated renders");
  bench_cmd->add_option("scene", scene_path)->required();
  bench_cmd->add_option("--reps", reps)->check(CLI::PositiveNumber);
  view.add_to(*bench_cmd);

  std::vector<std::string> validate_paths;
  auto* validate_cmd = app.add_subcommand("validate", "Check scene, volume or event-log files");
  validate_cmd->add_option("files", validate_paths)->required();

  std::string socket_path, scene_out;
  std::size_t max_connections = 0;
  int serve_threads = 0;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a session to a viewer over a Unix socket");
  serve_cmd->add_option("scene", scene_path)->required();
  serve_cmd->add_option("--socket", socket_path)->required();
  serve_cmd->add_option("--max-connections", max_connections, "0 = unlimited");
  serve_cmd->add_option("--save-events", log_path, "Write the applied event log on exit");
  serve_cmd->add_option("--save-scene", scene_out, "Write the final scene on exit");
  serve_cmd->add_option("--threads", serve_threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*gen_cmd) run_gen_volume(gen);
    if (*render_cmd) run_render(scene_path, view, out_path);
    if (*replay_cmd) run_replay(scene_path, log_path, view, out_dir, every, ext);
    if (*bench_cmd) run_bench(scene_path, view, reps);
    if (*validate_cmd) run_validate(validate_paths);
    if (*serve_cmd) run_serve(scene_path, socket_path, max_connections, log_path, scene_out, serve_threads);
  } catch (const Error& e) {
    return fail(to_string(e.kind()), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
