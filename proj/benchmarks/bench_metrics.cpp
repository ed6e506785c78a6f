#include <benchmark/benchmark.h>

#include "ccd/checkerboard.hpp"
#include "ccd/metrics.hpp"
#include "ccd/phantom.hpp"

namespace {

void BM_EvaluateImage(benchmark::State& state) {
  ccd::PhantomConfig pc;
  const ccd::Phantom p = ccd::generate(pc);
  const ccd::RoiSet rois{ccd::phantom_rois(64, 64)};
  for (auto _ : state) benchmark::DoNotOptimize(ccd::evaluate_image(p.clean, p.noisy, rois));
}
BENCHMARK(BM_EvaluateImage);

void BM_GeneratePhantom(benchmark::State& state) {
  ccd::PhantomConfig pc;
  pc.class_label = 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ccd::generate(pc).noisy);
    ++pc.seed;
  }
}
BENCHMARK(BM_GeneratePhantom)->Unit(benchmark::kMicrosecond);

void BM_MakeBlind(benchmark::State& state) {
  const ccd::ImageTensor img = ccd::generate(ccd::PhantomConfig{}).noisy;
  for (auto _ : state) benchmark::DoNotOptimize(ccd::make_blind(img, ccd::Parity::Odd));
}
BENCHMARK(BM_MakeBlind);

}  // namespace
