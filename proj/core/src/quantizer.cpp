#include "actc/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "actc/error.hpp"
#include "actc/kernels.hpp"

namespace actc {

namespace {

double round_to(Precision p, double v) noexcept {
  return p == Precision::single ? static_cast<double>(static_cast<float>(v)) : v;
}

double unit_roundoff(Precision p) noexcept {
  return p == Precision::single ? 0x1.0p-24 : 0x1.0p-53;
}

double levels_for(int bits) noexcept { return static_cast<double>((1u << bits) - 1u); }

// Adjusts the range until min + range and (min + range) − min both round
// back to themselves in the storage precision, so the decoded group maximum
// reproduces the same sidecar when it is quantized again.
double settle_range(Precision p, double mn, double range) noexcept {
  for (int it = 0; it < 8; ++it) {
    const double top = round_to(p, mn + range);
    const double next = round_to(p, top - mn);
    if (next == range) break;
    range = next;
  }
  return range;
}

void require_width(int bits) {
  if (!is_codec_width(bits)) {
    throw InvalidArgument("unsupported bit width " + std::to_string(bits));
  }
}

}  // namespace

bool is_codec_width(int bits) noexcept {
  return bits == kFullPrecisionBits || (bits >= 1 && bits <= 16);
}

bool on_ladder(int bits) noexcept {
  return std::find(kBitLadder.begin(), kBitLadder.end(), bits) != kBitLadder.end();
}

double bit_factor(int bits) noexcept {
  if (bits >= kFullPrecisionBits) return 0.0;
  const double l = levels_for(bits);
  return 1.0 / (l * l);
}

std::size_t QuantizedTensor::numel() const { return shape.empty() ? 0 : shape_numel(shape); }

std::vector<std::uint32_t> QuantizedTensor::codes() const {
  if (bits == kFullPrecisionBits) return {};
  const std::size_t n = numel();
  if (words.size() != packed_words(n, bits)) {
    throw FormatError("packed payload holds " + std::to_string(words.size()) + " words, expected " +
                      std::to_string(packed_words(n, bits)) + " for " + std::to_string(n) +
                      " codes");
  }
  return unpack_codes(words, bits, n);
}

bool same_payload(const QuantizedTensor& a, const QuantizedTensor& b) noexcept {
  if (a.shape != b.shape || a.precision != b.precision || a.bits != b.bits ||
      a.group_size != b.group_size || a.words != b.words ||
      a.raw_fallback.has_value() != b.raw_fallback.has_value()) {
    return false;
  }
  if (a.raw_fallback && !(*a.raw_fallback == *b.raw_fallback)) return false;
  auto bits_equal = [](const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) return false;
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (std::bit_cast<std::uint64_t>(u[i]) != std::bit_cast<std::uint64_t>(v[i])) return false;
    }
    return true;
  };
  return bits_equal(a.mins, b.mins) && bits_equal(a.ranges, b.ranges);
}

std::size_t packed_words(std::size_t count, int bits) noexcept {
  return (count * static_cast<std::size_t>(bits) + 63) / 64;
}

std::vector<std::uint64_t> pack_codes(std::span<const std::uint32_t> codes, int bits) {
  if (bits < 1 || bits > 16) throw InvalidArgument("pack width must be in [1, 16]");
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::vector<std::uint64_t> words(packed_words(codes.size(), bits), 0);
  std::size_t offset = 0;
  for (std::uint32_t c : codes) {
    const std::uint64_t v = c & mask;
    const std::size_t w = offset >> 6;
    const unsigned shift = offset & 63;
    words[w] |= v << shift;
    if (shift + bits > 64) words[w + 1] |= v >> (64 - shift);
    offset += bits;
  }
  return words;
}

std::vector<std::uint32_t> unpack_codes(std::span<const std::uint64_t> words, int bits,
                                        std::size_t count) {
  if (bits < 1 || bits > 16) throw InvalidArgument("unpack width must be in [1, 16]");
  if (words.size() < packed_words(count, bits)) throw FormatError("packed payload truncated");
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::vector<std::uint32_t> codes(count);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t w = offset >> 6;
    const unsigned shift = offset & 63;
    std::uint64_t v = words[w] >> shift;
    if (shift + bits > 64) v |= words[w + 1] << (64 - shift);
    codes[i] = static_cast<std::uint32_t>(v & mask);
    offset += bits;
  }
  return codes;
}

QuantizedTensor quantize(const Tensor& x, int bits, std::size_t group_size, StreamKey key) {
  require_width(bits);
  if (group_size < 2) throw InvalidArgument("group size must be at least 2");
  if (x.empty()) throw ShapeError("cannot quantize an empty tensor");
  x.require_finite("quantize input");

  QuantizedTensor q;
  q.shape = x.shape();
  q.precision = x.precision();
  q.bits = bits;
  q.group_size = group_size;
  q.key = key;
  if (bits == kFullPrecisionBits) {
    q.raw_fallback = x;
    return q;
  }

  const Precision p = x.precision();
  GroupStats stats = group_minmax(x, group_size);
  const double levels = levels_for(bits);
  const double eps = unit_roundoff(p);
  const auto data = x.data();
  const std::size_t n = data.size();

  std::vector<std::uint32_t> codes(n);
  for (std::size_t g = 0; g < stats.mins.size(); ++g) {
    const double mn = stats.mins[g];
    if (!std::isfinite(stats.ranges[g])) throw NumericError("group range overflows");
    const double range = settle_range(p, mn, round_to(p, stats.ranges[g]));
    stats.ranges[g] = range;
    const std::size_t lo = g * group_size;
    const std::size_t hi = std::min(n, lo + group_size);
    if (range == 0.0) continue;  // codes stay 0, decode to min exactly
    const double snap = std::min(1e-3, 2.0 * levels * eps * (1.0 + std::abs(mn) / range));
    for (std::size_t j = lo; j < hi; ++j) {
      double t = levels * ((data[j] - mn) / range);
      t = std::clamp(t, 0.0, levels);
      const double nearest = std::nearbyint(t);
      std::uint32_t code;
      if (std::abs(t - nearest) <= snap) {
        code = static_cast<std::uint32_t>(nearest);
      } else {
        const double floor_t = std::floor(t);
        const double frac = t - floor_t;
        code = static_cast<std::uint32_t>(floor_t) + (counter_rng(key, j) < frac ? 1u : 0u);
      }
      codes[j] = code;
    }
  }
  q.mins = std::move(stats.mins);
  q.ranges = std::move(stats.ranges);
  q.words = pack_codes(codes, bits);
  return q;
}

Tensor dequantize(const QuantizedTensor& q) {
  if (q.bits == kFullPrecisionBits) {
    if (!q.raw_fallback) throw FormatError("uncompressed payload is missing its raw data");
    if (q.raw_fallback->shape() != q.shape) throw FormatError("raw payload shape mismatch");
    return *q.raw_fallback;
  }
  require_width(q.bits);
  const std::size_t n = q.numel();
  if (q.words.size() != packed_words(n, q.bits)) {
    throw FormatError("packed payload holds " + std::to_string(q.words.size()) +
                      " words, expected " + std::to_string(packed_words(n, q.bits)));
  }
  if (q.group_size < 2 || q.mins.size() != num_groups(n, q.group_size) ||
      q.ranges.size() != q.mins.size()) {
    throw FormatError("group sidecar does not match element count");
  }
  Tensor out(q.shape, q.precision);
  auto data = out.data();
  const double inv_levels = 1.0 / levels_for(q.bits);
  const std::uint64_t mask = (std::uint64_t{1} << q.bits) - 1;
  std::size_t offset = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t w = offset >> 6;
    const unsigned shift = offset & 63;
    std::uint64_t v = q.words[w] >> shift;
    if (shift + q.bits > 64) v |= q.words[w + 1] << (64 - shift);
    offset += q.bits;
    const std::size_t g = j / q.group_size;
    // (code / levels) is exactly 0 and exactly 1 at the endpoints.
    const double unit = static_cast<double>(v & mask) * inv_levels;
    const double ratio = (v & mask) == mask ? 1.0 : unit;
    data[j] = round_to(q.precision, q.mins[g] + q.ranges[g] * ratio);
  }
  return out;
}

double variance_bound(const Tensor& x, int bits, std::size_t group_size) {
  require_width(bits);
  if (bits == kFullPrecisionBits) return 0.0;
  const GroupStats stats = group_minmax(x, group_size);
  const std::size_t n = x.numel();
  double total = 0.0;
  for (std::size_t g = 0; g < stats.ranges.size(); ++g) {
    const std::size_t members = std::min(group_size, n - g * group_size);
    total += static_cast<double>(members) * 0.25 * stats.ranges[g] * stats.ranges[g];
  }
  return total * bit_factor(bits);
}

std::uint64_t compressed_size_bits(const QuantizedTensor& q) noexcept {
  const std::uint64_t n = q.shape.empty() ? 0 : [&] {
    std::uint64_t c = 1;
    for (auto e : q.shape) c *= e;
    return c;
  }();
  const std::uint64_t w = scalar_bits(q.precision);
  if (q.bits == kFullPrecisionBits) return n * w + kQuantHeaderBits;
  return n * static_cast<std::uint64_t>(q.bits) + q.mins.size() * 2 * w + kQuantHeaderBits;
}

}  // namespace actc
