#include <benchmark/benchmark.h>

#include "ccd/phantom.hpp"
#include "ccd/random.hpp"
#include "ccd/trainer.hpp"

namespace {

std::vector<ccd::TrainingSample> phantom_batch(int n) {
  std::vector<ccd::TrainingSample> batch;
  for (int i = 0; i < n; ++i) {
    ccd::PhantomConfig pc;
    pc.class_label = i % 3;
    pc.seed = static_cast<std::uint64_t>(i);
    batch.push_back({ccd::generate(pc).noisy, i % 3});
  }
  return batch;
}

void BM_ForwardEval(benchmark::State& state) {
  const ccd::ModelParams model = ccd::init_params(ccd::NetConfig{}, 1);
  const ccd::ImageTensor img = phantom_batch(1)[0].image;
  for (auto _ : state) benchmark::DoNotOptimize(ccd::forward(model, img, ccd::Mode::eval).logits);
}
BENCHMARK(BM_ForwardEval)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ccd::ModelParams model = ccd::init_params(ccd::NetConfig{}, 1);
  ccd::OptimizerState opt = ccd::OptimizerState::zeros(model.values.size());
  const auto batch = phantom_batch(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ccd::train_step(model, opt, batch, ccd::Parity::Odd, ccd::TrainConfig{}, 1e-3));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Denoise(benchmark::State& state) {
  const ccd::DualModel model{ccd::init_params(ccd::NetConfig{}, 1), ccd::init_params(ccd::NetConfig{}, 2)};
  const ccd::ImageTensor img = phantom_batch(1)[0].image;
  for (auto _ : state) benchmark::DoNotOptimize(ccd::denoise(model, img));
}
BENCHMARK(BM_Denoise)->Unit(benchmark::kMillisecond);

}  // namespace
