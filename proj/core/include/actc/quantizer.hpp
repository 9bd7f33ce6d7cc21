#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "actc/rng.hpp"
#include "actc/tensor.hpp"

namespace actc {

/// Bit width meaning "store uncompressed".
inline constexpr int kFullPrecisionBits = 32;
/// Widths the allocator chooses from.
inline constexpr std::array<int, 4> kBitLadder = {2, 3, 4, 8};
inline constexpr std::size_t kDefaultGroupSize = 256;
/// Fixed per-tensor header charged by compressed_size_bits (bits, G, D, key).
inline constexpr std::uint64_t kQuantHeaderBits = 256;
inline constexpr std::uint32_t kQuantFormatVersion = 1;

/// Widths the codec can pack: 1..16 plus the uncompressed sentinel.
[[nodiscard]] bool is_codec_width(int bits) noexcept;
[[nodiscard]] bool on_ladder(int bits) noexcept;

/// S(b) = (2^b − 1)^−2, with S(32) = 0.
[[nodiscard]] double bit_factor(int bits) noexcept;

/// Per-group min/range sidecar plus bit-packed stochastic-rounding codes.
struct QuantizedTensor {
  Shape shape;
  Precision precision = Precision::single;
  int bits = kFullPrecisionBits;
  std::size_t group_size = kDefaultGroupSize;
  std::vector<double> mins;
  std::vector<double> ranges;
  /// b-bit codes, little-endian within 64-bit words, row-major, no padding.
  std::vector<std::uint64_t> words;
  /// Present iff bits == 32.
  std::optional<Tensor> raw_fallback;
  StreamKey key;

  [[nodiscard]] std::size_t numel() const;
  [[nodiscard]] std::size_t group_count() const noexcept { return mins.size(); }
  /// Unpacked codes; throws FormatError on a word count that does not match numel().
  [[nodiscard]] std::vector<std::uint32_t> codes() const;
};

/// Equality of everything except the rounding key.
[[nodiscard]] bool same_payload(const QuantizedTensor& a, const QuantizedTensor& b) noexcept;

/// Unbiased per-group b-bit stochastic rounding.
///
/// Within group g, t_j = (2^b − 1)(x_j − min_g)/range_g is rounded up with
/// probability frac(t_j) using counter_rng(key, j), where j is the flat
/// element index. Values whose t_j lies within floating-point error of an
/// integer are rounded to it deterministically, which makes re-quantizing a
/// decoded tensor reproduce the same codes for any key.
[[nodiscard]] QuantizedTensor quantize(const Tensor& x, int bits, std::size_t group_size,
                                       StreamKey key);

[[nodiscard]] Tensor dequantize(const QuantizedTensor& q);

/// Σ_j ¼·range_g(j)²·S(b): an upper bound on the summed elementwise compression variance.
[[nodiscard]] double variance_bound(const Tensor& x, int bits, std::size_t group_size);

/// D·b + groups·2·w + header for packed payloads, D·w + header when
/// uncompressed, with w the scalar width of the tensor's precision.
[[nodiscard]] std::uint64_t compressed_size_bits(const QuantizedTensor& q) noexcept;

[[nodiscard]] std::size_t packed_words(std::size_t count, int bits) noexcept;
[[nodiscard]] std::vector<std::uint64_t> pack_codes(std::span<const std::uint32_t> codes, int bits);
[[nodiscard]] std::vector<std::uint32_t> unpack_codes(std::span<const std::uint64_t> words,
                                                      int bits, std::size_t count);

/// "ACTQ" container: version, shape, precision, b, G, key, then either the raw
/// scalars (b == 32) or the group sidecar followed by the packed words.
void write_quantized(std::ostream& out, const QuantizedTensor& q);
[[nodiscard]] QuantizedTensor read_quantized(std::istream& in);

}  // namespace actc
