#include <gtest/gtest.h>

#include <cmath>

#include "actc/error.hpp"
#include "actc/ops.hpp"
#include "actc/tape.hpp"
#include "actc/theorycheck.hpp"
#include "oracles.hpp"

namespace actc {
namespace {

using testing::random_tensor;

ModelGraph mlp_tanh_ce() {
  return ModelGraph::from_json_text(R"({"input_dim": 4, "nodes": [
    {"kind": "linear", "out": 6}, {"kind": "tanh"}, {"kind": "linear", "out": 3}, {"kind": "softmax_ce"}]})");
}

ModelGraph segmented_mlp() {
  return ModelGraph::from_json_text(R"({"input_dim": 8, "nodes": [
    {"kind": "linear", "out": 32, "segment": true}, {"kind": "tanh"},
    {"kind": "linear", "out": 32, "segment": true}, {"kind": "tanh"},
    {"kind": "linear", "out": 4, "segment": true}, {"kind": "softmax_ce"}]})");
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

TEST(Tape, LosslessSchemeMatchesHandWrittenChain) {
  const ModelGraph m = mlp_tanh_ce();
  const Parameters p = m.init_params(3, Precision::single);
  const Batch b = testing::random_batch(m, 16, 4);
  Batch bs = b;
  bs.inputs.set_precision(Precision::single);
  const Episode ep = run_episode(m, p, bs, CompressionScheme{}, KeySet{1, {}});

  // Reference: the same chain spelled out op by op.
  const Tensor z1 = linear_forward(bs.inputs, p[0], p[1]);
  const Tensor a1 = tanh_forward(z1);
  const Tensor z2 = linear_forward(a1, p[2], p[3]);
  const SoftmaxCeResult ce = softmax_ce_forward(z2, bs.labels);
  const LinearGrads g2 = linear_vjp(a1, p[2], softmax_ce_vjp(ce.probs, bs.labels));
  const LinearGrads g1 = linear_vjp(bs.inputs, p[0], tanh_vjp_from_input(z1, g2.grad_input));
  EXPECT_EQ(ep.loss, ce.loss);
  ASSERT_EQ(ep.grads.tensors.size(), 4u);
  EXPECT_EQ(ep.grads.tensors[0], g1.grad_weight);
  EXPECT_EQ(ep.grads.tensors[1], g1.grad_bias);
  EXPECT_EQ(ep.grads.tensors[2], g2.grad_weight);
  EXPECT_EQ(ep.grads.tensors[3], g2.grad_bias);
}

TEST(Tape, SharedTensorIsStoredOnce) {
  // tanh saving its output shares that tensor with the next linear's input.
  const ModelGraph m = three_slot_mlp();
  const ContextPlan plan = m.plan(16);
  const SlotId hidden = plan.node_slots[1].front();
  EXPECT_EQ(plan.node_slots[2].front(), hidden);
  const ForwardResult fr = forward(m, m.init_params(1), testing::random_batch(m, 16, 2),
                                   CompressionScheme::uniform(plan.activation_slots(), 4), KeySet{1, {}});
  EXPECT_EQ(fr.store.alias_count(hidden), 1u);
  EXPECT_EQ(fr.store.accounting().aliases, 1u);
  EXPECT_EQ(plan.activation_slots().size(), 3u);
}

TEST(Tape, SingleLinearCrossEntropyByHand) {
  const ModelGraph m = ModelGraph::from_json_text(
      R"({"input_dim": 2, "nodes": [{"kind": "linear", "out": 2}, {"kind": "softmax_ce"}]})");
  Parameters p{Tensor::matrix(2, 2, {1.0, -1.0, 0.5, 2.0}, Precision::dbl), Tensor::vector({0.1, -0.2}, Precision::dbl)};
  Batch b;
  b.inputs = Tensor::matrix(4, 2, {1, 0, 0, 1, 1, 1, -1, 2}, Precision::dbl);
  b.labels = {0, 1, 1, 0};
  double expect = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double x0 = b.inputs.at(i, 0), x1 = b.inputs.at(i, 1);
    const double z0 = x0 * 1.0 + x1 * 0.5 + 0.1, z1 = x0 * -1.0 + x1 * 2.0 - 0.2;
    const double zl = b.labels[i] == 0 ? z0 : z1;
    expect += -(zl - std::log(std::exp(z0) + std::exp(z1)));
  }
  expect /= 4.0;
  EXPECT_NEAR(forward(m, p, b, {}, {}).loss, expect, 1e-6);
}

TEST(Tape, LosslessGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const ModelGraph m = ModelGraph::from_json_text(testing::random_model_json(seed, 5, seed % 2 == 1));
    const Parameters p = m.init_params(seed, Precision::dbl);
    const Batch b = testing::random_batch(m, 6, seed + 50);
    const KeySet keys{seed, {}};
    const Episode ep = run_episode(m, p, b, {}, keys);
    const auto fd = testing::fd_gradient(m, p, b, 1e-5, keys);
    EXPECT_LT(testing::relative_error(ep.grads.flat(), fd), 1e-4) << m.to_json_text();
  }
}

TEST(Tape, SaturatedLossHasTinyGradient) {
  const ModelGraph m = ModelGraph::from_json_text(
      R"({"input_dim": 2, "nodes": [{"kind": "linear", "out": 2}, {"kind": "softmax_ce"}]})");
  Parameters p{Tensor::matrix(2, 2, {50, -50, -50, 50}, Precision::dbl), Tensor({2}, Precision::dbl)};
  Batch b;
  b.inputs = Tensor::matrix(2, 2, {1, 0, 0, 1}, Precision::dbl);
  b.labels = {0, 1};
  EXPECT_LT(std::sqrt(run_episode(m, p, b, {}, {}).grads.squared_norm()), 1e-3);
}

TEST(Tape, CompressedRunIsDeterministic) {
  const ModelGraph m = reference_tanh_mlp();
  const Parameters p = m.init_params(2);
  const Batch b = reference_blobs(64, 3, Precision::single).all();
  const auto s = CompressionScheme::uniform(m.plan(64).activation_slots(), 4);
  const Episode a = run_episode(m, p, b, s, KeySet{9, {}});
  const Episode c = run_episode(m, p, b, s, KeySet{9, {}});
  EXPECT_EQ(a.grads.flat(), c.grads.flat());
  const Episode d = run_episode(m, p, b, s, KeySet{10, {}});
  EXPECT_NE(a.grads.flat(), d.grads.flat());
}

TEST(Tape, LossDoesNotDependOnScheme) {
  const ModelGraph m = reference_tanh_mlp();
  const Parameters p = m.init_params(2);
  const Batch b = reference_blobs(32, 3, Precision::single).all();
  const double raw = run_episode(m, p, b, {}, {}).loss;
  EXPECT_EQ(run_episode(m, p, b, CompressionScheme::uniform(m.plan(32).activation_slots(), 2), {}).loss, raw);
}

TEST(Tape, OverrideOnlyMovesOneSlot) {
  const KeySet k{5, {}};
  const KeySet o = k.with_override(3, 77);
  EXPECT_EQ(o.slot_key(3).seed, 77u);
  EXPECT_EQ(o.slot_key(2), k.slot_key(2));
  EXPECT_EQ(o.dropout_key(3), k.dropout_key(3));
}

TEST(Tape, BatchValidation) {
  const ModelGraph m = mlp_tanh_ce();
  Batch b = testing::random_batch(m, 4, 1);
  b.labels.pop_back();
  EXPECT_THROW(check_batch(m, b), ShapeError);
  Batch c = testing::random_batch(m, 4, 1);
  c.inputs = random_tensor({4, 3}, 2);
  EXPECT_THROW((void)run_episode(m, m.init_params(1), c, {}, {}), ShapeError);
}

TEST(Tape, AccountingReflectsBits) {
  const ModelGraph m = reference_tanh_mlp();
  const ContextPlan plan = m.plan(64);
  const Batch b = reference_blobs(64, 3, Precision::single).all();
  const Episode raw = run_episode(m, m.init_params(1), b, {}, {});
  EXPECT_EQ(raw.accounting.compression_ratio(), 1.0);
  EXPECT_EQ(raw.accounting.activation_raw_bits, 32u * plan.context_dims());
  const Episode q = run_episode(m, m.init_params(1), b, CompressionScheme::uniform(plan.activation_slots(), 4), {});
  EXPECT_GT(q.accounting.compression_ratio(), 6.0);
  EXPECT_LT(q.accounting.activation_stored_bits, raw.accounting.activation_stored_bits);
}

TEST(Checkpointed, LosslessIsBitIdentical) {
  const ModelGraph m = segmented_mlp();
  const Parameters p = m.init_params(4);
  const Batch b = reference_blobs(64, 5, Precision::single).all();
  const Episode plain = run_episode(m, p, b, {}, KeySet{1, {}});
  const Episode ck = run_episode(m, p, b, {}, KeySet{1, {}}, BackwardMode::checkpointed);
  EXPECT_EQ(plain.grads.flat(), ck.grads.flat());
  EXPECT_EQ(plain.loss, ck.loss);
}

TEST(Checkpointed, CompressedRunIsDeterministic) {
  const ModelGraph m = segmented_mlp();
  const Parameters p = m.init_params(4);
  const Batch b = reference_blobs(64, 5, Precision::single).all();
  const auto s = CompressionScheme::uniform(m.plan(64).activation_slots(), 4);
  EXPECT_EQ(checkpointed_backward(m, p, b, s, KeySet{3, {}}).flat(),
            checkpointed_backward(m, p, b, s, KeySet{3, {}}).flat());
}

TEST(Checkpointed, FourBitGradientStaysAligned) {
  const ModelGraph m = segmented_mlp();
  const Parameters p = m.init_params(4);
  const Batch b = reference_blobs(128, 5, Precision::single).all();
  const auto s = CompressionScheme::uniform(m.plan(128).activation_slots(), 4);
  const auto exact = run_episode(m, p, b, {}, {}).grads.flat();
  const auto ck = run_episode(m, p, b, s, KeySet{8, {}}, BackwardMode::checkpointed).grads.flat();
  EXPECT_GT(cosine(ck, exact), 0.99);
}

TEST(Checkpointed, StoresOnlySegmentInputs) {
  const ModelGraph m = segmented_mlp();
  const Batch b = reference_blobs(64, 5, Precision::single).all();
  const ContextPlan plan = m.plan(64);
  ASSERT_EQ(plan.segments.size(), 3u);
  const Episode plain = run_episode(m, m.init_params(1), b, {}, {});
  const Episode ck = run_episode(m, m.init_params(1), b, {}, {}, BackwardMode::checkpointed);
  std::size_t seg_dims = 0;
  for (const SegmentRange& r : plan.segments) seg_dims += plan.slot(r.input_slot).dims;
  EXPECT_EQ(ck.accounting.activation_raw_bits, 32u * seg_dims);
  EXPECT_LT(ck.accounting.activation_raw_bits, plain.accounting.activation_raw_bits);
}

TEST(Checkpointed, RequiresSegments) {
  const ModelGraph m = reference_tanh_mlp();
  EXPECT_THROW((void)checkpointed_backward(m, m.init_params(1), reference_blobs(16, 1, Precision::single).all(), {}, {}),
               Error);
}

TEST(Model, RejectsUnknownKeysAndBadBoundaries) {
  EXPECT_THROW((void)ModelGraph::from_json_text(R"({"input_dim": 2, "nodes": [{"kind": "linear", "out": 2, "x": 1},
    {"kind": "softmax_ce"}]})"), ConfigError);
  EXPECT_THROW((void)ModelGraph::from_json_text(R"({"input_dim": 2, "nodes": [{"kind": "linear", "out": 2},
    {"kind": "dropout", "keep_prob": 0.5, "segment": true}, {"kind": "softmax_ce"}]})"), ConfigError);
  EXPECT_THROW((void)ModelGraph::from_json_text(R"({"input_dim": 2, "nodes": [{"kind": "linear", "out": 2}]})"),
               Error);
}

TEST(Model, JsonRoundTrip) {
  const ModelGraph m = segmented_mlp();
  EXPECT_EQ(ModelGraph::from_json_text(m.to_json_text()).to_json_text(), m.to_json_text());
}

}  // namespace
}  // namespace actc
