#include <benchmark/benchmark.h>

#include "ccd/layers.hpp"
#include "ccd/random.hpp"

namespace {

ccd::Tensor random_tensor(int n, int c, int h, int w) {
  ccd::Rng rng(1);
  ccd::Tensor t(n, c, h, w);
  for (double& v : t.v) v = rng.normal();
  return t;
}

// Args: channels, spatial size, dilation.
void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  const int dil = static_cast<int>(state.range(2));
  const ccd::Tensor x = random_tensor(8, c, s, s);
  std::vector<double> w(static_cast<std::size_t>(c) * c * 9, 0.01), b(c, 0.0);
  const ccd::ConvWeights cw{w, b, c, c, 3};
  for (auto _ : state) benchmark::DoNotOptimize(ccd::conv2d(x, cw, ccd::same_geom(3, dil)));
  state.counters["GMAC/s"] = benchmark::Counter(8.0 * c * c * 9 * s * s * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv3x3)->Args({16, 64, 1})->Args({32, 32, 1})->Args({64, 16, 1})->Args({128, 8, 4})->Unit(benchmark::kMillisecond);

void BM_Conv3x3Backward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  const ccd::Tensor x = random_tensor(8, c, s, s);
  const ccd::Tensor dy = random_tensor(8, c, s, s);
  std::vector<double> w(static_cast<std::size_t>(c) * c * 9, 0.01), b(c, 0.0);
  std::vector<double> gw(w.size()), gb(c);
  const ccd::ConvWeights cw{w, b, c, c, 3};
  const ccd::ConvGrads cg{gw, gb, c, c, 3};
  ccd::Tensor dx;
  for (auto _ : state) {
    ccd::conv2d_backward(x, cw, ccd::same_geom(3), dy, &dx, cg);
    benchmark::DoNotOptimize(dx.v.data());
  }
}
BENCHMARK(BM_Conv3x3Backward)->Args({16, 64})->Args({64, 16})->Unit(benchmark::kMillisecond);

void BM_BatchNormTrain(benchmark::State& state) {
  const ccd::Tensor x = random_tensor(8, 16, 64, 64);
  std::vector<double> g(16, 1.0), b(16, 0.0), rm(16, 0.0), rv(16, 1.0);
  ccd::BatchNormCache cache;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ccd::batchnorm(x, ccd::BatchNormWeights{g, b, rm, rv, 16}, ccd::Mode::train, cache));
  }
}
BENCHMARK(BM_BatchNormTrain)->Unit(benchmark::kMillisecond);

}  // namespace
