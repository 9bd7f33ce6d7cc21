#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace actc {

using Shape = std::vector<std::size_t>;

/// Storage precision of a tensor.
///
/// Kernels accumulate in double and round their results once to the storage
/// precision, so a `single` tensor only ever holds float-representable values.
/// The tag also fixes the raw scalar width used by context accounting and
/// serialization.
enum class Precision : std::uint8_t { single = 0, dbl = 1 };

[[nodiscard]] constexpr unsigned scalar_bits(Precision p) noexcept {
  return p == Precision::single ? 32u : 64u;
}

[[nodiscard]] constexpr Precision promote(Precision a, Precision b) noexcept {
  return (a == Precision::dbl || b == Precision::dbl) ? Precision::dbl : Precision::single;
}

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of real scalars.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Precision precision = Precision::single);
  Tensor(Shape shape, std::vector<double> data, Precision precision = Precision::single);

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values,
                       Precision precision = Precision::single);
  static Tensor vector(std::initializer_list<double> values,
                       Precision precision = Precision::single);
  static Tensor full(Shape shape, double value, Precision precision = Precision::single);

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
  [[nodiscard]] std::size_t numel() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] Precision precision() const noexcept { return precision_; }
  /// Retags the tensor; switching to single rounds the contents to float.
  void set_precision(Precision p) noexcept;
  /// Rounds the contents to float when the tensor is tagged single.
  void apply_precision() noexcept;

  /// Leading extent for rank-2 tensors.
  [[nodiscard]] std::size_t rows() const;
  /// Trailing extent for rank-2 tensors.
  [[nodiscard]] std::size_t cols() const;

  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_[1] + c]; }

  [[nodiscard]] bool all_finite() const noexcept;
  /// Throws NumericError naming `what` if any scalar is NaN or Inf.
  void require_finite(const char* what) const;

  /// Same data under a new shape with the same element count.
  [[nodiscard]] Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor& a, const Tensor& b) noexcept;

 private:
  Shape shape_;
  std::vector<double> data_;
  Precision precision_ = Precision::single;
};

/// 64-bit content checksum over the bit patterns of the scalars (row-major).
[[nodiscard]] std::uint64_t checksum(std::span<const double> values) noexcept;

[[nodiscard]] double squared_norm(std::span<const double> values) noexcept;

}  // namespace actc
