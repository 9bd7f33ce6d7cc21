#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "actc/csv.hpp"
#include "actc/sensitivity.hpp"
#include "actc/theorycheck.hpp"
#include "oracles.hpp"

namespace actc {
namespace {

ModelGraph tiny_tanh() {
  return ModelGraph::from_json_text(R"({"input_dim": 4, "nodes": [
    {"kind": "linear", "out": 8}, {"kind": "tanh"}, {"kind": "linear", "out": 3}, {"kind": "softmax_ce"}]})");
}

SensitivityOptions unpinned(std::size_t pairs = 4) {
  SensitivityOptions o;
  o.n_pairs = pairs;
  o.min_dims = 0;
  o.pin_loss_head = false;
  return o;
}

TEST(Replay, FullPrecisionSlotHasZeroSensitivity) {
  const ModelGraph m = tiny_tanh();
  const ContextPlan plan = m.plan(32);
  const auto slots = plan.activation_slots();
  CompressionScheme s = CompressionScheme::uniform(slots, 4);
  s.bits_per_slot[slots[1]] = 32;
  const auto c = replay_sensitivities(m, m.init_params(1, Precision::dbl), testing::random_batch(m, 32, 2), s,
                                      KeySet{1, {}}, 99, unpinned());
  EXPECT_EQ(c.at(slots[1]), 0.0);
  EXPECT_GT(c.at(slots[0]), 0.0);
}

TEST(Replay, SlotBehindZeroWeightsHasZeroSensitivity) {
  const ModelGraph m = reference_tanh_mlp();
  Parameters p = m.init_params(3, Precision::dbl);
  // Output layer weights are zero: nothing flows back past node 4.
  const std::size_t w_out = *m.nodes()[4].weight;
  for (double& v : p[w_out].data()) v = 0.0;
  const ContextPlan plan = m.plan(32);
  const Batch b = reference_blobs(32, 4).all();
  const auto c = replay_sensitivities(m, p, b, CompressionScheme::uniform(plan.activation_slots(), 4), KeySet{2, {}},
                                      7, unpinned());
  for (SlotId id : plan.activation_slots()) {
    if (plan.slot(id).node < 4) EXPECT_EQ(c.at(id), 0.0) << plan.slot(id).label;
  }
}

TEST(Replay, PinnedSlotsCarryMarker) {
  const ModelGraph m = reference_tanh_mlp();
  const ContextPlan plan = m.plan(32);
  SensitivityOptions o;
  o.pin_loss_head = true;
  o.min_dims = 0;
  const auto c = replay_sensitivities(m, m.init_params(1, Precision::dbl), reference_blobs(32, 4).all(),
                                      CompressionScheme::uniform(plan.activation_slots(), 4), KeySet{2, {}}, 7, o);
  for (SlotId id : plan.loss_head_slots()) EXPECT_TRUE(std::isinf(c.at(id)));
}

TEST(PinnedSlots, UnionOfRules) {
  const ModelGraph m = reference_tanh_mlp();
  const ContextPlan plan = m.plan(2);  // probs slot has 8 dims, input slot 16
  CompressionScheme s;
  s.forced_fullprec = {plan.activation_slots()[2]};
  SensitivityOptions o;
  o.min_dims = 10;
  o.pin_loss_head = false;
  auto pinned = pinned_slots(plan, s, o);
  EXPECT_TRUE(pinned.contains(plan.activation_slots()[2]));
  EXPECT_TRUE(pinned.contains(plan.loss_head_slots().front()));
  EXPECT_FALSE(pinned.contains(plan.activation_slots()[0]));
  o.min_dims = 0;
  o.pin_loss_head = true;
  pinned = pinned_slots(plan, s, o);
  EXPECT_TRUE(pinned.contains(plan.loss_head_slots().front()));
  EXPECT_EQ(pinned.size(), 2u);
}

TEST(Estimate, AgreesWithBruteForceOracle) {
  const ModelGraph m = tiny_tanh();
  const Parameters p = m.init_params(5, Precision::dbl);
  const Batch b = testing::random_batch(m, 32, 6);
  const ContextPlan plan = m.plan(32);
  const CompressionScheme s = CompressionScheme::uniform(plan.activation_slots(), 4);
  const SensitivityProfile prof = estimate_sensitivities(m, p, b, s, 11, unpinned(50));
  for (SlotId id : plan.activation_slots()) {
    const double oracle = brute_force_sensitivity(m, p, b, s, id, 4, 2000, 12);
    EXPECT_NEAR(prof.c.at(id), oracle, 0.3 * oracle) << plan.slot(id).label;
  }
}

TEST(BruteForce, FullPrecisionIsZero) {
  const ModelGraph m = tiny_tanh();
  const ContextPlan plan = m.plan(16);
  EXPECT_EQ(brute_force_sensitivity(m, m.init_params(1, Precision::dbl), testing::random_batch(m, 16, 1),
                                    CompressionScheme::uniform(plan.activation_slots(), 4),
                                    plan.activation_slots()[0], 32, 100, 3),
            0.0);
}

TEST(BruteForce, ScalesWithSquaredGradient) {
  // Single linear layer with zero weights and mse: the gradient is linear in
  // the targets, so doubling them quadruples the variance.
  const ModelGraph m = ModelGraph::from_json_text(
      R"({"input_dim": 5, "nodes": [{"kind": "linear", "out": 2}, {"kind": "mse"}]})");
  Parameters p = m.init_params(1, Precision::dbl);
  for (auto& t : p)
    for (double& v : t.data()) v = 0.0;
  Batch b = testing::random_batch(m, 16, 2);
  const ContextPlan plan = m.plan(16);
  const SlotId x = plan.activation_slots()[0];
  CompressionScheme s;
  const double base = brute_force_sensitivity(m, p, b, s, x, 4, 200, 5);
  for (double& v : b.targets.data()) v *= 2.0;
  const double doubled = brute_force_sensitivity(m, p, b, s, x, 4, 200, 5);
  EXPECT_NEAR(doubled / base, 4.0, 1e-9);
}

TEST(BruteForce, RawVarianceFollowsBitFactor) {
  const ModelGraph m = tiny_tanh();
  const Parameters p = m.init_params(7, Precision::dbl);
  const Batch b = testing::random_batch(m, 32, 8);
  const ContextPlan plan = m.plan(32);
  const CompressionScheme s = CompressionScheme::uniform(plan.activation_slots(), 8);
  // The second linear's input enters the weight gradient linearly; the tanh
  // pre-activation leaves the linear regime at 2 bits.
  const SlotId id = plan.activation_slots()[2];
  ASSERT_EQ(plan.slot(id).node_kind, NodeKind::linear);
  const double v2 = brute_force_sensitivity(m, p, b, s, id, 2, 1000, 9) * bit_factor(2);
  const double v4 = brute_force_sensitivity(m, p, b, s, id, 4, 1000, 9) * bit_factor(4);
  EXPECT_NEAR(v2 / v4, 25.0, 0.4 * 25.0);
}

TEST(GradientVariance, ZeroWhenKeysRepeat) {
  const ModelGraph m = tiny_tanh();
  const ContextPlan plan = m.plan(16);
  const double v = gradient_variance(m, m.init_params(1, Precision::dbl), testing::random_batch(m, 16, 1),
                                     CompressionScheme::uniform(plan.activation_slots(), 2), 20,
                                     [](std::size_t) { return KeySet{4, {}}; });
  EXPECT_LT(v, 1e-28);
}

TEST(GradientVariance, ZeroAtFullPrecision) {
  const ModelGraph m = tiny_tanh();
  const double v = gradient_variance(m, m.init_params(1, Precision::dbl), testing::random_batch(m, 16, 1), {}, 20,
                                     [](std::size_t i) { return KeySet{i, {}}; });
  EXPECT_LT(v, 1e-28);
}

TEST(UpdateProfile, DecayRules) {
  SensitivityProfile old, fresh;
  old.c = {{0, 4.0}, {1, kPinnedSensitivity}, {2, 1.0}};
  fresh.c = {{0, 2.0}, {1, 5.0}, {2, 1.0}};
  old.ema_decay = 0.5;
  SensitivityProfile u = update_profile(old, fresh);
  EXPECT_DOUBLE_EQ(u.c[0], 3.0);
  EXPECT_TRUE(std::isinf(u.c[1]));
  EXPECT_DOUBLE_EQ(u.c[2], 1.0);
  old.ema_decay = 0.0;
  u = update_profile(old, fresh);
  EXPECT_DOUBLE_EQ(u.c[0], 2.0);
  u = update_profile(fresh, fresh);
  EXPECT_EQ(u.c, fresh.c);
}

TEST(ProfileCsv, Columns) {
  const ModelGraph m = tiny_tanh();
  const ContextPlan plan = m.plan(16);
  SensitivityProfile prof;
  for (SlotId id : plan.activation_slots()) prof.c[id] = 0.5;
  prof.c[plan.loss_head_slots().front()] = kPinnedSensitivity;
  std::stringstream ss;
  write_profile_csv(ss, prof, plan, CompressionScheme::uniform(plan.activation_slots(), 4));
  const CsvTable t = parse_csv(ss);
  EXPECT_EQ(t.header, (std::vector<std::string>{"slot_id", "node_kind", "D_l", "c_l", "bits_assigned"}));
  EXPECT_EQ(t.rows.size(), plan.activation_slots().size());
  EXPECT_EQ(t.rows.back()[3], "inf");
}

}  // namespace
}  // namespace actc
