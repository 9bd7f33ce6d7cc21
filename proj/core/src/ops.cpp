#include "actc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "actc/error.hpp"
#include "actc/kernels.hpp"

namespace actc {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

void check_labels(std::span<const std::int64_t> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw ShapeError("softmax_ce: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  }
  for (std::int64_t y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidArgument("label " + std::to_string(y) + " out of range for " +
                            std::to_string(classes) + " classes");
    }
  }
}

}  // namespace

Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  Tensor y = matmul(input, weight);
  add_row_bias(y, bias);
  return y;
}

LinearGrads linear_vjp(const Tensor& ctx_input, const Tensor& weight, const Tensor& upstream) {
  if (ctx_input.rank() != 2 || weight.rank() != 2 || upstream.rank() != 2 ||
      ctx_input.rows() != upstream.rows() || ctx_input.cols() != weight.rows() ||
      weight.cols() != upstream.cols()) {
    throw ShapeError("linear_vjp: input " + shape_to_string(ctx_input.shape()) + ", weight " +
                     shape_to_string(weight.shape()) + ", upstream " +
                     shape_to_string(upstream.shape()));
  }
  return {matmul_nt(upstream, weight), matmul_tn(ctx_input, upstream), column_sum(upstream)};
}

Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_vjp(const Tensor& ctx_input, const Tensor& upstream) {
  require_same_shape(ctx_input, upstream, "relu_vjp");
  Tensor g(upstream.shape(), promote(ctx_input.precision(), upstream.precision()));
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] = ctx_input[i] > 0.0 ? upstream[i] : 0.0;
  return g;
}

Tensor tanh_forward(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = std::tanh(v);
  y.apply_precision();
  return y;
}

Tensor tanh_vjp_from_input(const Tensor& ctx_input, const Tensor& upstream) {
  require_same_shape(ctx_input, upstream, "tanh_vjp");
  Tensor g(upstream.shape(), promote(ctx_input.precision(), upstream.precision()));
  for (std::size_t i = 0; i < g.numel(); ++i) {
    const double t = std::tanh(ctx_input[i]);
    g[i] = upstream[i] * (1.0 - t * t);
  }
  g.apply_precision();
  return g;
}

Tensor tanh_vjp_from_output(const Tensor& ctx_output, const Tensor& upstream) {
  require_same_shape(ctx_output, upstream, "tanh_vjp");
  Tensor g(upstream.shape(), promote(ctx_output.precision(), upstream.precision()));
  for (std::size_t i = 0; i < g.numel(); ++i) {
    const double y = ctx_output[i];
    g[i] = upstream[i] * (1.0 - y * y);
  }
  g.apply_precision();
  return g;
}

IndexPayload dropout_mask(StreamKey key, std::size_t numel, double keep_prob) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw InvalidArgument("keep_prob must lie in (0, 1]");
  IndexPayload mask(numel);
  for (std::size_t j = 0; j < numel; ++j) mask[j] = counter_rng(key, j) < keep_prob ? 1 : 0;
  return mask;
}

Tensor dropout_forward(const Tensor& x, const IndexPayload& mask, double keep_prob) {
  if (mask.size() != x.numel()) throw ShapeError("dropout mask size mismatch");
  Tensor y = x;
  const double scale = 1.0 / keep_prob;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = mask[i] ? y[i] * scale : 0.0;
  y.apply_precision();
  return y;
}

Tensor dropout_vjp(const IndexPayload& mask, const Tensor& upstream, double keep_prob) {
  if (mask.size() != upstream.numel()) throw ShapeError("dropout mask size mismatch");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw InvalidArgument("keep_prob must lie in (0, 1]");
  Tensor g(upstream.shape(), upstream.precision());
  const double scale = 1.0 / keep_prob;
  for (std::size_t i = 0; i < g.numel(); ++i) {
    if (mask[i] != 0 && mask[i] != 1) {
      throw InvalidArgument("dropout mask entry " + std::to_string(mask[i]) + " is not 0 or 1");
    }
    g[i] = mask[i] ? upstream[i] * scale : 0.0;
  }
  g.apply_precision();
  return g;
}

PoolResult maxpool2d_forward(const Tensor& x, const PoolGeometry& g) {
  if (x.rank() != 2 || x.cols() != g.channels * g.height * g.width) {
    throw ShapeError("maxpool2d input " + shape_to_string(x.shape()) + " does not match geometry");
  }
  const std::size_t n = x.rows(), oh = g.out_height(), ow = g.out_width();
  const std::size_t in_row = x.cols(), out_row = g.channels * oh * ow;
  PoolResult r{Tensor({n, out_row}, x.precision()), IndexPayload(n * out_row)};
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < g.channels; ++c) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_at = 0;
          bool first = true;
          for (std::size_t di = 0; di < g.kernel; ++di) {
            for (std::size_t dj = 0; dj < g.kernel; ++dj) {
              const std::size_t at = s * in_row + c * g.height * g.width +
                                     (i * g.stride + di) * g.width + (j * g.stride + dj);
              if (first || x[at] > best) {
                best = x[at];
                best_at = at;
                first = false;
              }
            }
          }
          const std::size_t o = s * out_row + c * oh * ow + i * ow + j;
          r.output[o] = best;
          r.indices[o] = static_cast<std::int64_t>(best_at);
        }
      }
    }
  }
  return r;
}

Tensor maxpool2d_vjp(const IndexPayload& ctx_indices, const Tensor& upstream, const Shape& input_shape) {
  if (ctx_indices.size() != upstream.numel()) throw ShapeError("maxpool2d index count mismatch");
  Tensor g(input_shape, upstream.precision());
  for (std::size_t o = 0; o < ctx_indices.size(); ++o) {
    const std::int64_t at = ctx_indices[o];
    if (at < 0 || static_cast<std::size_t>(at) >= g.numel()) {
      throw InvalidArgument("maxpool2d index " + std::to_string(at) + " out of range");
    }
    g[static_cast<std::size_t>(at)] += upstream[o];
  }
  g.apply_precision();
  return g;
}

SoftmaxCeResult softmax_ce_forward(const Tensor& logits, std::span<const std::int64_t> labels) {
  if (logits.rank() != 2) throw ShapeError("softmax_ce expects [N x K] logits");
  const std::size_t n = logits.rows(), k = logits.cols();
  check_labels(labels, n, k);
  SoftmaxCeResult r{0.0, Tensor({n, k}, logits.precision())};
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits.at(i, c));
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(logits.at(i, c) - mx);
    const double log_z = std::log(z) + mx;
    for (std::size_t c = 0; c < k; ++c) r.probs.at(i, c) = std::exp(logits.at(i, c) - log_z);
    r.loss += log_z - logits.at(i, static_cast<std::size_t>(labels[i]));
  }
  r.loss /= static_cast<double>(n);
  r.probs.apply_precision();
  return r;
}

Tensor softmax_ce_vjp(const Tensor& ctx_probs, std::span<const std::int64_t> labels) {
  if (ctx_probs.rank() != 2) throw ShapeError("softmax_ce_vjp expects [N x K] probabilities");
  const std::size_t n = ctx_probs.rows(), k = ctx_probs.cols();
  check_labels(labels, n, k);
  Tensor g = ctx_probs;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.at(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    for (std::size_t c = 0; c < k; ++c) g.at(i, c) *= inv_n;
  }
  g.apply_precision();
  return g;
}

double mse_forward(const Tensor& prediction, const Tensor& targets) {
  require_same_shape(prediction, targets, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < prediction.numel(); ++i) {
    const double d = prediction[i] - targets[i];
    s += d * d;
  }
  return 0.5 * s / static_cast<double>(prediction.shape()[0]);
}

Tensor mse_vjp(const Tensor& ctx_prediction, const Tensor& targets) {
  require_same_shape(ctx_prediction, targets, "mse_vjp");
  Tensor g(ctx_prediction.shape(), promote(ctx_prediction.precision(), targets.precision()));
  const double inv_n = 1.0 / static_cast<double>(ctx_prediction.shape()[0]);
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] = (ctx_prediction[i] - targets[i]) * inv_n;
  g.apply_precision();
  return g;
}

}  // namespace actc
