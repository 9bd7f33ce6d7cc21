#include <benchmark/benchmark.h>

#include "actc/quantizer.hpp"
#include "actc/rng.hpp"

namespace {

actc::Tensor normal_tensor(std::size_t n) {
  actc::Tensor x({n});
  for (std::size_t i = 0; i < n; ++i) x[i] = actc::counter_normal({11, 0}, i);
  x.apply_precision();
  return x;
}

void BM_Quantize(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int bits = static_cast<int>(state.range(1));
  const actc::Tensor x = normal_tensor(n);
  std::uint64_t draw = 0;
  for (auto _ : state) {
    auto q = actc::quantize(x, bits, actc::kDefaultGroupSize, {draw++, 0});
    benchmark::DoNotOptimize(q);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_Quantize)->ArgsProduct({{1 << 12, 1 << 18}, {2, 4, 8}});

void BM_Dequantize(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int bits = static_cast<int>(state.range(1));
  const auto q = actc::quantize(normal_tensor(n), bits, actc::kDefaultGroupSize, {1, 0});
  for (auto _ : state) {
    auto y = actc::dequantize(q);
    benchmark::DoNotOptimize(y);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_Dequantize)->ArgsProduct({{1 << 12, 1 << 18}, {2, 4, 8}});

}  // namespace
