#include <benchmark/benchmark.h>

#include "smoe/random.hpp"
#include "smoe/synthetic.hpp"
#include "smoe/trainer.hpp"
#include "smoe/tsk_head.hpp"

using namespace smoe;

namespace {

ModelConfig bench_config(std::size_t base) {
  ModelConfig c;
  c.depth = 2;
  c.base_channels = base;
  return c;
}

}  // namespace

static void BM_TskForward(benchmark::State& state) {
  const auto hw = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  auto params = FuzzyRuleParams::init(4, rng);
  std::vector<double> a(hw * hw), b(hw * hw);
  for (double& v : a) v = rng.uniform();
  for (double& v : b) v = rng.uniform();
  const Tensor x1 = Tensor::from_data({1, 1, hw, hw}, a), x2 = Tensor::from_data({1, 1, hw, hw}, b);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(tsk_forward(x1, x2, params));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * hw * hw));
}
BENCHMARK(BM_TskForward)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

static void BM_ModelForward(benchmark::State& state) {
  const Model model(bench_config(static_cast<std::size_t>(state.range(0))), 1);
  const auto scene = make_synthetic_scene(5);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, scene.image));
}
BENCHMARK(BM_ModelForward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
  Model model(bench_config(static_cast<std::size_t>(state.range(0))), 1);
  const auto scene = make_synthetic_scene(6);
  const Sample sample{scene.image, scene.boundary, scene.id};
  const Batch batch = make_batch({&sample});
  AdamState adam;
  for (auto _ : state) benchmark::DoNotOptimize(train_step(model, adam, batch, {}));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
