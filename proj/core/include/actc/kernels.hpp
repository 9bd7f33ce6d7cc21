#pragma once

#include <cstddef>
#include <vector>

#include "actc/tensor.hpp"

namespace actc {

/// C = A·B for A[m×k], B[k×n].
[[nodiscard]] Tensor matmul(const Tensor& a, const Tensor& b);
/// C = Aᵀ·B for A[k×m], B[k×n].
[[nodiscard]] Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// C = A·Bᵀ for A[m×k], B[n×k].
[[nodiscard]] Tensor matmul_nt(const Tensor& a, const Tensor& b);

/// Adds bias[n] to every row of x[m×n] in place.
void add_row_bias(Tensor& x, const Tensor& bias);
/// Column sums of x[m×n] as a length-n vector.
[[nodiscard]] Tensor column_sum(const Tensor& x);

[[nodiscard]] Tensor identity(std::size_t n, Precision precision = Precision::single);

/// Per-group extrema of the row-major flattening of a tensor.
struct GroupStats {
  std::vector<double> mins;
  std::vector<double> ranges;  // max − min, never negative
};

[[nodiscard]] std::size_t num_groups(std::size_t numel, std::size_t group_size) noexcept;

/// Partitions the flat data into ⌈D/G⌉ consecutive groups, the last possibly short.
/// Throws InvalidArgument for G < 2 and ShapeError for an empty tensor.
[[nodiscard]] GroupStats group_minmax(const Tensor& x, std::size_t group_size);

}  // namespace actc
