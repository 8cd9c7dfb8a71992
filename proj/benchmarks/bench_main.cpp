// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

// Hot paths of a training step. Set OPENBLAS_CORETYPE for realistic conv
// numbers on cores the distro OpenBLAS misdetects.

#include <benchmark/benchmark.h>

#include "fdnet/attention.hpp"
#include "fdnet/ftb.hpp"
#include "fdnet/model.hpp"
#include "fdnet/nn.hpp"
#include "fdnet/random.hpp"

namespace fdnet {
namespace {

Tensor<float> random_tensor(Shape shape, uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<float>(rng.normal());
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  const int64_t c = state.range(0), s = state.range(1);
  ParameterStore<float> store;
  Rng rng(1);
  Conv2d<float> conv(store, "c", c, c, 3, {1, 1, 1}, true, rng);
  const Var<float> x(random_tensor({2, c, s, s}, 2));
  for (auto _ : state) benchmark::DoNotOptimize(conv(x).value().data());
  state.SetItemsProcessed(state.iterations() * 2 * c * c * 9 * s * s);
}
BENCHMARK(BM_Conv3x3)->Args({32, 64})->Args({64, 32})->Args({128, 16})->Unit(benchmark::kMillisecond);

void BM_Conv3x3Backward(benchmark::State& state) {
  const int64_t c = state.range(0), s = state.range(1);
  ParameterStore<float> store;
  Rng rng(1);
  Conv2d<float> conv(store, "c", c, c, 3, {1, 1, 1}, true, rng);
  const Var<float> x(random_tensor({2, c, s, s}, 2), true);
  const Tensor<float> target({2, c, s, s});
  for (auto _ : state) {
    store.zero_grad();
    backward(ops::bce_with_logits(conv(x), target));
  }
}
BENCHMARK(BM_Conv3x3Backward)->Args({32, 64})->Unit(benchmark::kMillisecond);

void BM_FourierBlock(benchmark::State& state) {
  const int64_t s = state.range(0);
  const ftb::FourierTransformBlock<float> block(0.1);
  const Var<float> x(random_tensor({2, 64, s, s}, 3));
  for (auto _ : state) benchmark::DoNotOptimize(block(x).value().data());
}
BENCHMARK(BM_FourierBlock)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_AttentionBlock(benchmark::State& state) {
  const int64_t s = state.range(0);
  const attention::AttentionBlock<float> block(2);
  const Var<float> x(random_tensor({2, 64, s, s}, 4));
  for (auto _ : state) benchmark::DoNotOptimize(block(x).value().data());
}
BENCHMARK(BM_AttentionBlock)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ForwardTiny(benchmark::State& state) {
  const int64_t s = state.range(0);
  ModelConfig mc;
  mc.backbone = backbone::BackboneConfig::tiny();
  const FdNet<float> model(mc, 5);
  const Var<float> x(random_tensor({1, 3, s, s}, 6));
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x).final_at(3).value().data());
}
BENCHMARK(BM_ForwardTiny)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace fdnet

BENCHMARK_MAIN();
