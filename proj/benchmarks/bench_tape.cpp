#include <benchmark/benchmark.h>

#include "actc/tape.hpp"
#include "actc/theorycheck.hpp"

namespace {

void BM_Episode(benchmark::State& state) {
  const int bits = static_cast<int>(state.range(0));
  const auto mode = state.range(1) ? actc::BackwardMode::checkpointed : actc::BackwardMode::plain;
  const actc::ModelGraph model = actc::ModelGraph::from_json_text(R"({"input_dim": 8, "nodes": [
    {"kind": "linear", "out": 32, "segment": true}, {"kind": "tanh"},
    {"kind": "linear", "out": 32, "segment": true}, {"kind": "tanh"},
    {"kind": "linear", "out": 4}, {"kind": "softmax_ce"}]})");
  const actc::Parameters params = model.init_params(3);
  const actc::Batch batch = actc::reference_blobs(256, 3, actc::Precision::single).all();
  const actc::ContextPlan plan = model.plan(batch.size());
  const actc::CompressionScheme scheme =
      bits == 32 ? actc::CompressionScheme{} : actc::CompressionScheme::uniform(plan.activation_slots(), bits);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto ep = actc::run_episode(model, params, batch, scheme, actc::KeySet{seed++, {}}, mode);
    benchmark::DoNotOptimize(ep);
  }
}
BENCHMARK(BM_Episode)->ArgsProduct({{32, 4, 2}, {0, 1}})->Unit(benchmark::kMicrosecond);

}  // namespace
