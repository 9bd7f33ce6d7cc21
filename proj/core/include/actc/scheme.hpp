#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <vector>

#include "actc/quantizer.hpp"

namespace actc {

using SlotId = std::size_t;

/// Per-slot bit widths for activation context plus the quantizer group size.
///
/// Slots without an entry, and every forced slot, are stored at 32 bits.
struct CompressionScheme {
  std::map<SlotId, int> bits_per_slot;
  std::size_t group_size = kDefaultGroupSize;
  std::set<SlotId> forced_fullprec;

  [[nodiscard]] int bits_for(SlotId slot) const noexcept;
  /// Throws InvalidArgument when any width is neither a codec width nor 32.
  void validate() const;

  /// Σ b_l·D_l / Σ D_l over the given slots; forced slots count as 32.
  [[nodiscard]] double average_bits(const std::map<SlotId, std::size_t>& dims) const;

  static CompressionScheme uniform(const std::vector<SlotId>& slots, int bits,
                                   std::size_t group_size = kDefaultGroupSize);

  friend bool operator==(const CompressionScheme&, const CompressionScheme&) = default;
};

}  // namespace actc
