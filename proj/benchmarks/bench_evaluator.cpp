#include <benchmark/benchmark.h>

#include "smoe/baselines.hpp"
#include "smoe/evaluator.hpp"
#include "smoe/synthetic.hpp"

using namespace smoe;

namespace {

BoundaryMap shifted(const BoundaryMap& m, std::size_t dx) {
  BoundaryMap out(m.height, m.width);
  for (std::size_t y = 0; y < m.height; ++y)
    for (std::size_t x = 0; x + dx < m.width; ++x) out.set(y, x + dx, m.at(y, x));
  return out;
}

SyntheticScene scene_of_size(std::size_t n) {
  SyntheticOptions o;
  o.height = o.width = n;
  o.max_shapes = 5;
  return make_synthetic_scene(7, o);
}

}  // namespace

static void BM_MatchBoundaries(benchmark::State& state) {
  const auto scene = scene_of_size(static_cast<std::size_t>(state.range(0)));
  const BoundaryMap gt = boundary_from_image(scene.boundary);
  const BoundaryMap pred = shifted(gt, 1);
  const double tol = static_cast<double>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(match_boundaries(pred, gt, tol));
  state.counters["gt_pixels"] = static_cast<double>(gt.count());
}
BENCHMARK(BM_MatchBoundaries)->Args({128, 1})->Args({128, 3})->Args({256, 2})->Unit(benchmark::kMicrosecond);

static void BM_Thin(benchmark::State& state) {
  const auto scene = scene_of_size(static_cast<std::size_t>(state.range(0)));
  const BoundaryMap thick = binarize(gaussian_blur(scene.boundary, 1.5), 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(thin(thick));
}
BENCHMARK(BM_Thin)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);

static void BM_PrSweep(benchmark::State& state) {
  const auto scene = scene_of_size(128);
  const Image prob = gaussian_blur(scene.boundary, 1.0);
  const std::vector<BoundaryMap> gts{boundary_from_image(scene.boundary)};
  const auto thresholds = default_thresholds(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pr_sweep(prob, gts, thresholds, 1.0));
}
BENCHMARK(BM_PrSweep)->Arg(9)->Arg(33)->Unit(benchmark::kMillisecond);

static void BM_Canny(benchmark::State& state) {
  const auto scene = scene_of_size(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(canny(scene.image, 1.0, 0.1, 0.25));
}
BENCHMARK(BM_Canny)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
