// Serial reference path vs OpenMP path for each data-parallel kernel.
// Run with OMP_NUM_THREADS set to the core count of interest.

#include "affstereo/calibration.hpp"
#include "affstereo/sim.hpp"
#include "affstereo/stereo.hpp"
#include "affstereo/surface.hpp"

#include <benchmark/benchmark.h>

using namespace affstereo;

namespace {

ExecutionPolicy policy_of(const benchmark::State& state) {
  return state.range(0) == 0 ? ExecutionPolicy::Serial : ExecutionPolicy::Parallel;
}

void label(benchmark::State& state) {
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel x" + std::to_string(max_threads()));
}

struct SurfaceData {
  StereoRig rig;
  std::vector<StereoMatch> matches;
  std::vector<Point2> us;
  std::vector<Point3> xs;
};

const SurfaceData& surface_data() {
  static const SurfaceData data = [] {
    SimScene scene;
    SurfaceData d;
    d.rig = make_rig(scene.rig);
    const SurfaceSample s = sample_surface(scene, d.rig, 20000, 0.25, 0.05, RngSeed{1});
    d.matches = s.matches;
    for (const auto& m : s.matches) {
      d.us.push_back(m.left);
      d.xs.push_back(triangulate(d.rig, m.left, m.right));
    }
    return d;
  }();
  return data;
}

void BM_Ransac(benchmark::State& state) {
  SimScene scene;
  scene.n_t = 1000;
  scene.noise.outlier_fraction = 0.3;
  const auto [set, truth] = generate_correspondences(scene);
  const auto xs = set.points();
  const auto us = set.left_pixels();
  RansacConfig cfg;
  cfg.inlier_threshold = 6.0;
  for (auto _ : state) benchmark::DoNotOptimize(dlt_affine_ransac(xs, us, cfg, policy_of(state)));
  label(state);
}

void BM_EpipolarFilter(benchmark::State& state) {
  const auto& d = surface_data();
  for (auto _ : state) benchmark::DoNotOptimize(filter_epipolar(d.matches, d.rig.fundamental, 2.0, policy_of(state)));
  label(state);
}

void BM_TriangulateSet(benchmark::State& state) {
  const auto& d = surface_data();
  for (auto _ : state) benchmark::DoNotOptimize(triangulate_set(d.rig, d.matches, policy_of(state)));
  label(state);
}

void BM_FitSurface(benchmark::State& state) {
  const auto& d = surface_data();
  const std::span<const Point2> us(d.us.data(), 5000);
  const std::span<const Point3> xs(d.xs.data(), 5000);
  for (auto _ : state) benchmark::DoNotOptimize(fit_surface(us, xs, SplineFitConfig{}, policy_of(state)));
  label(state);
}

void BM_EvaluateSurfaceBatch(benchmark::State& state) {
  const auto& d = surface_data();
  static const SurfaceFit fit = fit_surface(std::span(d.us).first(5000), std::span(d.xs).first(5000), SplineFitConfig{});
  std::vector<Point2> us;
  for (const auto& u : d.us)
    if (fit.surface.domain().contains(u)) us.push_back(u);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_surface_batch(fit.surface, us, policy_of(state)));
  label(state);
}

}  // namespace

BENCHMARK(BM_Ransac)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EpipolarFilter)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TriangulateSet)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FitSurface)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateSurfaceBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
