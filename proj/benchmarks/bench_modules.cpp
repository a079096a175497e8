// Parallel kernels against the serial reference implementations the tests use.
#include <benchmark/benchmark.h>

#include "naive_modules.hpp"
#include "svqa/module_net.hpp"
#include "svqa/rng.hpp"

using namespace svqa;

namespace {

FeatureMap random_map(Rng& rng, int c, int h, int w) {
  FeatureMap m = FeatureMap::zeros(c, h, w);
  for (double& v : m.data) v = rng.uniform_real() * 2.0 - 1.0;
  return m;
}

Conv3x3 random_conv(Rng& rng, int oc, int ic) {
  Conv3x3 k;
  k.out_ch = oc;
  k.in_ch = ic;
  k.w.resize(static_cast<size_t>(oc) * ic * 9);
  for (double& v : k.w) v = (rng.uniform_real() * 2.0 - 1.0) * 0.1;
  return k;
}

}  // namespace

static void BM_Conv2dSame(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  Rng rng(1);
  const FeatureMap in = random_map(rng, c, hw, hw);
  const Conv3x3 k = random_conv(rng, c, c);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_same(in, k));
  state.SetItemsProcessed(state.iterations() * int64_t(c) * c * hw * hw * 9);
}
BENCHMARK(BM_Conv2dSame)->Args({32, 16})->Args({64, 14})->Args({128, 14});

static void BM_Conv2dSameSerial(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  Rng rng(1);
  const FeatureMap in = random_map(rng, c, hw, hw);
  const Conv3x3 k = random_conv(rng, c, c);
  for (auto _ : state) benchmark::DoNotOptimize(naive::conv2d_same(in, k));
  state.SetItemsProcessed(state.iterations() * int64_t(c) * c * hw * hw * 9);
}
BENCHMARK(BM_Conv2dSameSerial)->Args({32, 16})->Args({64, 14})->Args({128, 14});

static void BM_VectorModule(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  const VectorNmnParams params = make_test_vector_params(2, c, 16, 32, 2);
  Rng rng(3);
  const FeatureMap h_x = random_map(rng, c, hw, hw);
  ModuleVector left(static_cast<size_t>(c));
  for (double& v : left) v = rng.uniform_real();
  for (auto _ : state)
    benchmark::DoNotOptimize(vector_nmn_forward(params, "unique", h_x, &left, nullptr));
}
BENCHMARK(BM_VectorModule)->Args({32, 16})->Args({64, 14});

static void BM_VectorModuleSerial(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  const VectorNmnParams params = make_test_vector_params(2, c, 16, 32, 2);
  Rng rng(3);
  const FeatureMap h_x = random_map(rng, c, hw, hw);
  ModuleVector left(static_cast<size_t>(c));
  for (double& v : left) v = rng.uniform_real();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        naive::vector_nmn_forward(params, "unique", h_x, &left, nullptr, -1));
}
BENCHMARK(BM_VectorModuleSerial)->Args({32, 16})->Args({64, 14});

BENCHMARK_MAIN();
