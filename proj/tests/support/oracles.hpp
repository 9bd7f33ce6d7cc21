#pragma once

// Reference implementations used by the tests. Everything here is written
// from the definitions, without calling the library's kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "actc/model.hpp"
#include "actc/tape.hpp"

namespace actc::testing {

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor c({m, n}, Precision::dbl);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a.values()[i * k + p] * b.values()[p * n + j];
      c.at(i, j) = s;
    }
  }
  return c;
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0,
                            Precision precision = Precision::dbl) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Tensor t(std::move(shape), precision);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = nd(gen);
  t.apply_precision();
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// ‖a − b‖ / max(‖b‖, tiny)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline std::vector<double> flatten(const std::vector<Tensor>& ts) {
  std::vector<double> out;
  for (const Tensor& t : ts) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

/// Uncompressed loss at `params`.
inline double loss_at(const ModelGraph& model, const Parameters& params, const Batch& batch,
                      const KeySet& keys = {}) {
  return forward(model, params, batch, CompressionScheme{}, keys).loss;
}

/// Central differences of the loss with respect to every parameter scalar.
inline std::vector<double> fd_gradient(const ModelGraph& model, Parameters params, const Batch& batch,
                                       double step = 1e-5, const KeySet& keys = {}) {
  std::vector<double> g;
  for (auto& t : params) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double keep = t[i];
      t[i] = keep + step;
      const double up = loss_at(model, params, batch, keys);
      t[i] = keep - step;
      const double down = loss_at(model, params, batch, keys);
      t[i] = keep;
      g.push_back((up - down) / (2.0 * step));
    }
  }
  return g;
}

/// Small random feed-forward chain as JSON, built from `seed`.
inline std::string random_model_json(std::uint64_t seed, std::size_t input_dim, bool regression) {
  std::mt19937_64 gen(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
  };
  std::ostringstream s;
  s << R"({"input_dim": )" << input_dim << R"(, "nodes": [)";
  const std::size_t hidden_layers = pick(1, 3);
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    s << R"({"kind": "linear", "out": )" << pick(2, 7) << "}, ";
    switch (pick(0, 3)) {
      case 0: s << R"({"kind": "tanh"}, )"; break;
      case 1: s << R"({"kind": "tanh", "saves": "output"}, )"; break;
      case 2: s << R"({"kind": "relu"}, )"; break;
      default: s << R"({"kind": "dropout", "keep_prob": 0.75}, )"; break;
    }
  }
  s << R"({"kind": "linear", "out": )" << (regression ? 2 : 3) << "}, ";
  s << (regression ? R"({"kind": "mse"}]})" : R"({"kind": "softmax_ce"}]})");
  return s.str();
}

inline Batch random_batch(const ModelGraph& model, std::size_t n, std::uint64_t seed) {
  Batch b;
  b.inputs = random_tensor({n, model.input_dim()}, seed);
  std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ULL);
  if (model.loss_kind() == LossKind::mse) {
    b.targets = random_tensor({n, model.output_dim()}, seed + 1);
  } else {
    std::uniform_int_distribution<std::int64_t> lab(0, static_cast<std::int64_t>(model.output_dim()) - 1);
    for (std::size_t i = 0; i < n; ++i) b.labels.push_back(lab(gen));
  }
  return b;
}

}  // namespace actc::testing
