#include <benchmark/benchmark.h>

#include <cmath>

#include "actc/allocator.hpp"
#include "actc/rng.hpp"

namespace {

actc::AllocationProblem random_problem(std::size_t slots, std::uint64_t seed) {
  actc::AllocationProblem p;
  for (std::size_t l = 0; l < slots; ++l) {
    p.c[l] = std::pow(10.0, -3.0 + 6.0 * actc::counter_rng({seed, 1}, l));
    p.dims[l] = 16 + static_cast<std::size_t>(4080.0 * actc::counter_rng({seed, 2}, l));
  }
  p.budget_bits = actc::budget_from_average(4.0, p.dims, {});
  return p;
}

void BM_AllocateGreedy(benchmark::State& state) {
  auto p = random_problem(static_cast<std::size_t>(state.range(0)), 5);
  p.fill_slack = state.range(1) != 0;
  for (auto _ : state) {
    auto s = actc::allocate_bits(p);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_AllocateGreedy)->ArgsProduct({{6, 64, 512}, {0, 1}});

void BM_AllocateExhaustive(benchmark::State& state) {
  const auto p = random_problem(static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state) {
    auto s = actc::exhaustive_allocate(p);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_AllocateExhaustive)->Arg(4)->Arg(6)->Arg(8);

}  // namespace
