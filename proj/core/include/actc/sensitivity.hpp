#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <set>

#include "actc/model.hpp"
#include "actc/scheme.hpp"
#include "actc/tape.hpp"

namespace actc {

/// Marker for slots that must stay at 32 bits.
inline constexpr double kPinnedSensitivity = std::numeric_limits<double>::infinity();

struct SensitivityProfile {
  /// c_l per activation slot; kPinnedSensitivity for pinned slots.
  std::map<SlotId, double> c;
  std::int64_t estimated_at_step = 0;
  double ema_decay = 0.5;
  CompressionScheme scheme_used;

  /// Slots carrying the pinned marker.
  [[nodiscard]] std::set<SlotId> pinned() const;
};

struct SensitivityOptions {
  /// Seed pairs averaged per estimate.
  std::size_t n_pairs = 4;
  /// Activation slots smaller than this are pinned to 32 bits.
  std::size_t min_dims = 16;
  /// Pin the slot(s) saved by the loss node.
  bool pin_loss_head = false;
  double ema_decay = 0.5;
  std::int64_t step = 0;
  BackwardMode mode = BackwardMode::plain;
};

/// Per-slot pinning decision shared by the profiler and the trainer.
[[nodiscard]] std::set<SlotId> pinned_slots(const ContextPlan& plan, const CompressionScheme& scheme,
                                            const SensitivityOptions& options);

/// One round of seed replay: g₀ with `base`, then for each slot l a g₁ in
/// which only slot l is re-seeded with `fresh_seed`. Returns ½‖g₀ − g₁‖²/S(b_l)
/// per activation slot; slots at 32 bits get 0 and pinned slots the marker.
[[nodiscard]] std::map<SlotId, double> replay_sensitivities(
    const ModelGraph& model, const Parameters& params, const Batch& batch,
    const CompressionScheme& scheme, const KeySet& base, std::uint64_t fresh_seed,
    const SensitivityOptions& options = {});

/// Averages replay_sensitivities over options.n_pairs seed pairs derived from `seed`.
[[nodiscard]] SensitivityProfile estimate_sensitivities(const ModelGraph& model,
                                                        const Parameters& params,
                                                        const Batch& batch,
                                                        const CompressionScheme& scheme,
                                                        std::uint64_t seed,
                                                        const SensitivityOptions& options = {});

/// Σ over gradient coordinates of the sample variance of g across `n_draws`
/// episodes, episode i run with keys_for(i).
[[nodiscard]] double gradient_variance(const ModelGraph& model, const Parameters& params,
                                       const Batch& batch, const CompressionScheme& scheme,
                                       std::size_t n_draws,
                                       const std::function<KeySet(std::size_t)>& keys_for,
                                       BackwardMode mode = BackwardMode::plain);

/// Monte Carlo oracle: variance of the gradient when only `slot` draws fresh
/// keys (at `bits`) and every other stream stays fixed, divided by S(bits).
[[nodiscard]] double brute_force_sensitivity(const ModelGraph& model, const Parameters& params,
                                             const Batch& batch, const CompressionScheme& scheme,
                                             SlotId slot, int bits, std::size_t n_draws,
                                             std::uint64_t seed);

/// c = decay·old + (1 − decay)·fresh per slot, decay taken from `old`.
[[nodiscard]] SensitivityProfile update_profile(const SensitivityProfile& old,
                                                const SensitivityProfile& fresh);

/// CSV: slot_id,node_kind,D_l,c_l,bits_assigned.
void write_profile_csv(std::ostream& out, const SensitivityProfile& profile, const ContextPlan& plan,
                       const CompressionScheme& assigned);

}  // namespace actc
