#include <benchmark/benchmark.h>

#include "smoe/random.hpp"
#include "smoe/tensor.hpp"

using namespace smoe;

namespace {

Tensor random_tensor(Rng& rng, Shape s, bool grad = false) {
  std::vector<double> v(shape_numel(s));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from_data(std::move(s), std::move(v), grad);
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  const Tensor x = random_tensor(rng, {1, c, hw, hw});
  const Tensor w = random_tensor(rng, {c, c, 3, 3});
  const Tensor b = random_tensor(rng, {c});
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, {1, 1, 1}));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * c * c * 9 * hw * hw));
}
BENCHMARK(BM_Conv2dForward)->Args({8, 64})->Args({16, 64})->Args({32, 32})->Unit(benchmark::kMicrosecond);

static void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  Rng rng(2);
  Tensor x = random_tensor(rng, {1, c, hw, hw}, true);
  Tensor w = random_tensor(rng, {c, c, 3, 3}, true);
  Tensor b = random_tensor(rng, {c}, true);
  for (auto _ : state) {
    backward(sum(conv2d(x, w, b, {1, 1, 1})));
    for (Tensor* t : {&x, &w, &b}) t->zero_grad();
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({8, 64})->Args({16, 64})->Unit(benchmark::kMicrosecond);

static void BM_SortedChannelSum(benchmark::State& state) {
  Rng rng(3);
  const Tensor x = random_tensor(rng, {4, 4, 64, 64});
  const bool order_invariant = state.range(0) != 0;
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(sum_channels(x, order_invariant));
}
BENCHMARK(BM_SortedChannelSum)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
