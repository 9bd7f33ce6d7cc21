#include "actc/tensor.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "actc/error.hpp"

namespace actc {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(shape));
    n *= e;
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Precision precision)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0), precision_(precision) {}

Tensor::Tensor(Shape shape, std::vector<double> data, Precision precision)
    : shape_(std::move(shape)), data_(std::move(data)), precision_(precision) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " scalars");
  }
  apply_precision();
}

void Tensor::set_precision(Precision p) noexcept {
  precision_ = p;
  apply_precision();
}

void Tensor::apply_precision() noexcept {
  if (precision_ != Precision::single) return;
  for (double& v : data_) v = static_cast<double>(static_cast<float>(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values,
                      Precision precision) {
  return Tensor({rows, cols}, std::vector<double>(values), precision);
}

Tensor Tensor::vector(std::initializer_list<double> values, Precision precision) {
  return Tensor({values.size()}, std::vector<double>(values), precision);
}

Tensor Tensor::full(Shape shape, double value, Precision precision) {
  Tensor t(std::move(shape), precision);
  for (double& v : t.data_) v = value;
  t.apply_precision();
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() needs a rank-2 tensor, got " + shape_to_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() needs a rank-2 tensor, got " + shape_to_string(shape_));
  return shape_[1];
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::require_finite(const char* what) const {
  if (!all_finite()) throw NumericError(std::string("non-finite values in ") + what);
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_, precision_);
}

bool operator==(const Tensor& a, const Tensor& b) noexcept {
  if (a.shape_ != b.shape_ || a.precision_ != b.precision_) return false;
  for (std::size_t i = 0; i < a.data_.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a.data_[i]) != std::bit_cast<std::uint64_t>(b.data_[i])) {
      return false;
    }
  }
  return true;
}

std::uint64_t checksum(std::span<const double> values) noexcept {
  // FNV-1a over 64-bit lanes with a final avalanche.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    h ^= std::bit_cast<std::uint64_t>(v);
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  h ^= values.size();
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

double squared_norm(std::span<const double> values) noexcept {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

}  // namespace actc
