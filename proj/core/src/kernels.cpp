#include "actc/kernels.hpp"

#include <algorithm>

#include "actc/error.hpp"

namespace actc {

namespace {

void require_matrix(const Tensor& t, const char* name) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(name) + " must be a matrix, got " + shape_to_string(t.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul inner dimensions differ: " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  Tensor c({m, n}, promote(a.precision(), b.precision()));
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  double* cp = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = cp + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ap[i * k + p];
      const double* brow = bp + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  c.apply_precision();
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn lhs");
  require_matrix(b, "matmul_tn rhs");
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul_tn leading dimensions differ: " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
  Tensor c({m, n}, promote(a.precision(), b.precision()));
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  double* cp = c.data().data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = ap + p * m;
    const double* brow = bp + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = arow[i];
      double* crow = cp + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
  c.apply_precision();
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt lhs");
  require_matrix(b, "matmul_nt rhs");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw ShapeError("matmul_nt trailing dimensions differ: " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
  Tensor c({m, n}, promote(a.precision(), b.precision()));
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  double* cp = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = ap + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = bp + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      cp[i * n + j] = s;
    }
  }
  c.apply_precision();
  return c;
}

void add_row_bias(Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_row_bias input");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.numel() != n) {
    throw ShapeError("bias of " + std::to_string(bias.numel()) + " entries for " +
                     std::to_string(n) + " columns");
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) x.at(i, j) += bias[j];
  }
  x.apply_precision();
}

Tensor column_sum(const Tensor& x) {
  require_matrix(x, "column_sum input");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor s({n}, x.precision());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) s[j] += x.at(i, j);
  }
  s.apply_precision();
  return s;
}

Tensor identity(std::size_t n, Precision precision) {
  Tensor t({n, n}, precision);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t num_groups(std::size_t numel, std::size_t group_size) noexcept {
  return group_size == 0 ? 0 : (numel + group_size - 1) / group_size;
}

GroupStats group_minmax(const Tensor& x, std::size_t group_size) {
  if (group_size < 2) throw InvalidArgument("group size must be at least 2");
  if (x.empty()) throw ShapeError("group_minmax of an empty tensor");
  const auto data = x.data();
  const std::size_t groups = num_groups(data.size(), group_size);
  GroupStats stats;
  stats.mins.resize(groups);
  stats.ranges.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t lo = g * group_size;
    const std::size_t hi = std::min(data.size(), lo + group_size);
    const auto [mn, mx] = std::minmax_element(data.begin() + lo, data.begin() + hi);
    stats.mins[g] = *mn;
    stats.ranges[g] = *mx - *mn;
  }
  return stats;
}

}  // namespace actc
