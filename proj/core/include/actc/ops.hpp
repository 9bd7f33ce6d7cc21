#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "actc/context_store.hpp"
#include "actc/model.hpp"
#include "actc/rng.hpp"
#include "actc/tensor.hpp"

namespace actc {

/// Y = X·W + b with X[N×in], W[in×out], b[out].
[[nodiscard]] Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct LinearGrads {
  Tensor grad_input;
  Tensor grad_weight;
  Tensor grad_bias;
};

/// grad_weight = inputᵀ·upstream, grad_input = upstream·weightᵀ, grad_bias = Σ_rows upstream.
[[nodiscard]] LinearGrads linear_vjp(const Tensor& ctx_input, const Tensor& weight,
                                     const Tensor& upstream);

[[nodiscard]] Tensor relu_forward(const Tensor& x);
[[nodiscard]] Tensor relu_vjp(const Tensor& ctx_input, const Tensor& upstream);

[[nodiscard]] Tensor tanh_forward(const Tensor& x);
/// Uses the saved pre-activation: upstream ⊙ (1 − tanh²(z)).
[[nodiscard]] Tensor tanh_vjp_from_input(const Tensor& ctx_input, const Tensor& upstream);
/// Uses the saved output: upstream ⊙ (1 − y²).
[[nodiscard]] Tensor tanh_vjp_from_output(const Tensor& ctx_output, const Tensor& upstream);

/// Keep mask in {0, 1}: element j is kept iff counter_rng(key, j) < keep_prob.
[[nodiscard]] IndexPayload dropout_mask(StreamKey key, std::size_t numel, double keep_prob);
[[nodiscard]] Tensor dropout_forward(const Tensor& x, const IndexPayload& mask, double keep_prob);
/// upstream ⊙ mask / keep_prob; throws InvalidArgument for entries outside {0, 1}.
[[nodiscard]] Tensor dropout_vjp(const IndexPayload& mask, const Tensor& upstream, double keep_prob);

struct PoolResult {
  Tensor output;
  /// Flat index into the input tensor of each output's argmax.
  IndexPayload indices;
};

/// Each input row is a channels×height×width image. Ties go to the first
/// maximum in row-major window order.
[[nodiscard]] PoolResult maxpool2d_forward(const Tensor& x, const PoolGeometry& geometry);
/// Scatters upstream into the recorded argmax positions of a zero tensor.
[[nodiscard]] Tensor maxpool2d_vjp(const IndexPayload& ctx_indices, const Tensor& upstream,
                                   const Shape& input_shape);

struct SoftmaxCeResult {
  double loss = 0.0;
  Tensor probs;
};

/// Mean over the batch of −log softmax(logits)[label].
[[nodiscard]] SoftmaxCeResult softmax_ce_forward(const Tensor& logits,
                                                 std::span<const std::int64_t> labels);
/// (probs − onehot) / N.
[[nodiscard]] Tensor softmax_ce_vjp(const Tensor& ctx_probs, std::span<const std::int64_t> labels);

/// (1 / 2N)·Σ (y − t)².
[[nodiscard]] double mse_forward(const Tensor& prediction, const Tensor& targets);
/// (y − t) / N.
[[nodiscard]] Tensor mse_vjp(const Tensor& ctx_prediction, const Tensor& targets);

}  // namespace actc
