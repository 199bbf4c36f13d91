#include <benchmark/benchmark.h>

#include <random>

#include "csrnet/metrics.hpp"
#include "csrnet/model.hpp"
#include "csrnet/ops.hpp"
#include "csrnet/training.hpp"

using namespace csrnet;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor t(shape);
  for (float& v : t.data()) v = u(rng);
  return t;
}

ImageRGB random_image(std::size_t side, std::uint64_t seed) {
  return ImageRGB(random_tensor({3, side, side}, seed));
}

void BM_Conv1x1(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor input = random_tensor({64, side, side}, 1);
  const Tensor weight = random_tensor({64, 64, 1, 1}, 2);
  const Tensor bias({64});
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(input, weight, bias));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * side * side));
}
BENCHMARK(BM_Conv1x1)->Arg(32)->Arg(128);

void BM_ConditionVector(benchmark::State& state) {
  const ModelParams params = build_model(ModelConfig{}, 1);
  const ImageRGB image = random_image(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(condition_vector(params, image));
}
BENCHMARK(BM_ConditionVector)->Arg(64)->Arg(256);

void BM_Forward(benchmark::State& state) {
  const ModelParams params = build_model(ModelConfig{}, 1);
  const auto side = static_cast<std::size_t>(state.range(0));
  const ImageRGB image = random_image(side, 4);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, image));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * side * side));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  const ModelParams params = build_model(ModelConfig{}, 1);
  const auto side = static_cast<std::size_t>(state.range(0));
  const ImageRGB image = random_image(side, 5);
  const ImageRGB target = random_image(side, 6);
  for (auto _ : state) {
    const auto trace = trace_forward(params, image);
    const auto loss = train::l1_loss(trace.output, target.tensor());
    benchmark::DoNotOptimize(trace_backward(params, trace, loss.grad));
  }
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64);

void BM_Ssim(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const ImageRGB a = random_image(side, 7);
  const ImageRGB b = random_image(side, 8);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
