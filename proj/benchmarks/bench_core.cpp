#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "qlens/context_dvr.hpp"
#include "qlens/focus_shading.hpp"
#include "qlens/quadric_lens.hpp"
#include "qlens/render.hpp"
#include "qlens/scene_io.hpp"
#include "qlens/volume.hpp"

using namespace qlens;

namespace {

const VolumeGrid& shell(int n) {
  static const VolumeGrid grid = [n] {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::sphere_shell;
    return generate_synthetic_volume(spec, {n, n, n});
  }();
  return grid;
}

std::vector<Vec3> random_points(std::size_t count) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts(count);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

void BM_Trilinear(benchmark::State& state) {
  const auto& grid = shell(128);
  const auto pts = random_points(4096);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_trilinear(grid, pts[i++ & 4095]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Trilinear);

void BM_RayIntersect(benchmark::State& state) {
  QuadricLens lens;
  lens.id = 1;
  lens.length = 0.5;
  lens.k1 = 2.0;
  lens.k2 = -1.5;
  lens.pose.translation = Vec3(0.5, 0.5, 0.5);
  const auto targets = random_points(4096);
  std::size_t i = 0;
  for (auto _ : state) {
    const Vec3& t = targets[i++ & 4095];
    const Ray ray{Vec3(0.5, 0.5, 2.0), (t - Vec3(0.5, 0.5, 2.0)).normalized()};
    benchmark::DoNotOptimize(ray_intersect(lens, ray));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RayIntersect);

void BM_FocusFragment(benchmark::State& state) {
  const auto& grid = shell(128);
  QuadricLens lens;
  lens.id = 1;
  lens.length = 0.5;
  lens.k1 = 1.0;
  lens.pose.translation = Vec3(0.5, 0.5, 0.5);
  FocusSettings settings;
  settings.n_samples = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(focus_fragment(grid, lens, Vec2(0.1, -0.05), settings));
  }
}
BENCHMARK(BM_FocusFragment)->Arg(1)->Arg(5);

void BM_RenderShell(benchmark::State& state) {
  Scene scene = load_scene_file(QLENS_SCENES_DIR "/shell.json");
  scene.camera.width = scene.camera.height = static_cast<int>(state.range(0));
  scene.settings.context.mode = static_cast<ContextMode>(state.range(1));
  std::uint64_t samples = 0;
  for (auto _ : state) {
    const Frame frame = render_frame(scene);
    samples += frame.stats.samples;
  }
  state.counters["samples/s"] = benchmark::Counter(static_cast<double>(samples), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_RenderShell)
    ->ArgsProduct({{128, 256}, {0, 1, 2}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
