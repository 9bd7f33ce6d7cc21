#pragma once

#include <array>
#include <cstdint>

namespace actc {

/// Identifies one reproducible random stream.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

/// Philox4x32-10 block function: four 32-bit words of output from a 128-bit
/// counter and a 64-bit key.
[[nodiscard]] std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                                         std::array<std::uint32_t, 2> key) noexcept;

/// Uniform draw on [0, 1) that is a pure function of (key, counter).
///
/// The stream id and the counter form the Philox counter block, the seed is
/// the Philox key. 53 random bits feed the mantissa.
[[nodiscard]] double counter_rng(const StreamKey& key, std::uint64_t counter) noexcept;

/// Raw 64 random bits for (key, counter).
[[nodiscard]] std::uint64_t counter_bits(const StreamKey& key, std::uint64_t counter) noexcept;

/// Standard normal draw via Box-Muller on counters 2c and 2c+1.
[[nodiscard]] double counter_normal(const StreamKey& key, std::uint64_t counter) noexcept;

/// SplitMix64 finalizer; used to derive independent seeds.
[[nodiscard]] std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for a sub-experiment `index` of a run seeded with `seed`.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace actc
