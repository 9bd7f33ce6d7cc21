#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <vector>

#include "actc/scheme.hpp"

namespace actc {

struct AllocationProblem {
  std::map<SlotId, double> c;
  std::map<SlotId, std::size_t> dims;
  std::vector<int> ladder{kBitLadder.begin(), kBitLadder.end()};
  /// Bound on Σ b_l·D_l over the slots that are not pinned.
  std::uint64_t budget_bits = 0;
  /// Pinned to 32 bits and excluded from the budget; slots with c = +∞ are added implicitly.
  std::set<SlotId> forced;
  std::size_t group_size = kDefaultGroupSize;
  /// After the downgrade sweep, spend leftover budget on upgrades and apply
  /// pairwise exchanges until neither lowers the predicted variance.
  bool fill_slack = true;
};

/// floor(avg_bits · Σ D_l) over the slots of `dims` not in `forced`.
[[nodiscard]] std::uint64_t budget_from_average(double avg_bits,
                                                const std::map<SlotId, std::size_t>& dims,
                                                const std::set<SlotId>& forced = {});

/// Σ c_l·S(b_l) over the slots of `c`; 32-bit slots contribute 0.
[[nodiscard]] double predicted_variance(const std::map<SlotId, double>& c,
                                        const CompressionScheme& scheme);

/// Σ b_l·D_l over the slots of the problem that are not pinned.
[[nodiscard]] std::uint64_t scheme_bits(const AllocationProblem& p, const CompressionScheme& scheme);

/// Greedy: every free slot starts at max(ladder); the downgrade with the
/// smallest variance increase per saved bit is applied until the budget holds
/// (ties to the smaller slot id), followed by the slack refinement when enabled.
[[nodiscard]] CompressionScheme allocate_bits(const AllocationProblem& p);

/// Enumerates ladder^L for at most 8 free slots.
[[nodiscard]] CompressionScheme exhaustive_allocate(const AllocationProblem& p);

/// CSV: slot_id,D_l,c_l,b_l.
void write_scheme_csv(std::ostream& out, const AllocationProblem& p, const CompressionScheme& scheme);

}  // namespace actc
