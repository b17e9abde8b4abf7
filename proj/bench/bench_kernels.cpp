// Parallel kernels against the serial reference: convolution, dense layer,
// polynomial expansion, whole-pair flow and tiny-WRN inference.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "gait/nets/architectures.hpp"
#include "gait/optflow/flow.hpp"
#include "gait/reference/kernels.hpp"
#include "gait/reference/optflow.hpp"
#include "gait/tensornet/kernels.hpp"

using namespace gait;
using tensornet::Tensor;

namespace {

Tensor<float> random_tensor(tensornet::Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data()) v = g(rng);
  return t;
}

std::vector<double> random_image(std::size_t w, std::size_t h) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  std::vector<double> img(w * h);
  for (auto& v : img) v = u(rng);
  return img;
}

// batch 16, 3x3 convolution at the first WRN group's size
void BM_Conv(benchmark::State& state, bool reference) {
  const std::size_t c = std::size_t(state.range(0));
  const auto x = random_tensor({16, c, 48, 48}, 1);
  const auto w = random_tensor({c, c, 3, 3}, 2);
  const std::vector<float> bias;
  for (auto _ : state) {
    auto y = reference ? reference::conv2d_forward<float>(x, w, bias, 1, 1)
                       : tensornet::kernels::conv2d_forward<float>(x, w, bias, 1, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}

void BM_Dense(benchmark::State& state, bool reference) {
  const auto x = random_tensor({64, 1152}, 3);
  const auto w = random_tensor({1024, 1152}, 4);
  const std::vector<float> bias(1024, 0.1f);
  for (auto _ : state) {
    auto y = reference ? reference::dense_forward<float>(x, w, bias)
                       : tensornet::kernels::dense_forward<float>(x, w, bias);
    benchmark::DoNotOptimize(y.data().data());
  }
}

void BM_PolyExpand(benchmark::State& state, bool reference) {
  const auto img = random_image(64, 96);
  for (auto _ : state) {
    auto p = reference ? reference::poly_expand(img, 64, 96, 5, 1.1) : optflow::poly_expand(img, 64, 96, 5, 1.1);
    benchmark::DoNotOptimize(&p);
  }
}

void BM_FlowPair(benchmark::State& state) {
  optflow::Frame a(64, 96), b(64, 96);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) a.pixels[i] = u(rng);
  for (std::size_t y = 0; y < 96; ++y)
    for (std::size_t x = 0; x < 64; ++x) b.at(x, y) = a.at((x + 63) % 64, y);
  for (auto _ : state) {
    auto f = optflow::farneback_flow(a, b);
    benchmark::DoNotOptimize(f.u.data());
  }
}

void BM_TinyWrnFeatures(benchmark::State& state) {
  const auto model = nets::build_model<float>(nets::tiny_wrn(10), 1);
  const auto x = random_tensor({64, 3, 48, 48}, 5);
  for (auto _ : state) {
    auto f = model.net.features(x, model.params);
    benchmark::DoNotOptimize(f.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}

}  // namespace

BENCHMARK_CAPTURE(BM_Conv, parallel, false)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Conv, reference, true)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Dense, parallel, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Dense, reference, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_PolyExpand, parallel, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_PolyExpand, reference, true)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FlowPair)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TinyWrnFeatures)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
