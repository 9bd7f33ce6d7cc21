#include "actc/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "actc/error.hpp"
#include "actc/parallel.hpp"

namespace actc {

namespace {

double half_sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return 0.5 * s;
}

}  // namespace

std::set<SlotId> SensitivityProfile::pinned() const {
  std::set<SlotId> out;
  for (const auto& [slot, v] : c) {
    if (std::isinf(v)) out.insert(slot);
  }
  return out;
}

std::set<SlotId> pinned_slots(const ContextPlan& plan, const CompressionScheme& scheme,
                              const SensitivityOptions& options) {
  std::set<SlotId> out = scheme.forced_fullprec;
  for (SlotId id : plan.activation_slots()) {
    if (plan.slot(id).dims < options.min_dims) out.insert(id);
  }
  if (options.pin_loss_head) {
    for (SlotId id : plan.loss_head_slots()) out.insert(id);
  }
  return out;
}

std::map<SlotId, double> replay_sensitivities(const ModelGraph& model, const Parameters& params,
                                              const Batch& batch, const CompressionScheme& scheme,
                                              const KeySet& base, std::uint64_t fresh_seed,
                                              const SensitivityOptions& options) {
  const ContextPlan plan = model.plan(batch.size());
  const std::set<SlotId> pinned = pinned_slots(plan, scheme, options);
  std::vector<SlotId> measured;
  std::map<SlotId, double> c;
  for (SlotId id : plan.activation_slots()) {
    if (pinned.contains(id)) {
      c[id] = kPinnedSensitivity;
    } else if (scheme.bits_for(id) == kFullPrecisionBits) {
      c[id] = 0.0;
    } else {
      measured.push_back(id);
    }
  }
  if (measured.empty()) return c;

  // Index 0 is g₀; index i > 0 re-seeds measured[i − 1].
  std::vector<std::vector<double>> g(measured.size() + 1);
  parallel_for(g.size(), [&](std::size_t i) {
    const KeySet keys = i == 0 ? base : base.with_override(measured[i - 1], fresh_seed);
    g[i] = run_episode(model, params, batch, scheme, keys, options.mode).grads.flat();
  });
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double s = bit_factor(scheme.bits_for(measured[i]));
    c[measured[i]] = half_sq_dist(g[0], g[i + 1]) / s;
  }
  return c;
}

SensitivityProfile estimate_sensitivities(const ModelGraph& model, const Parameters& params,
                                          const Batch& batch, const CompressionScheme& scheme,
                                          std::uint64_t seed, const SensitivityOptions& options) {
  if (options.n_pairs == 0) throw InvalidArgument("n_pairs must be at least 1");
  if (!(options.ema_decay >= 0.0 && options.ema_decay < 1.0)) {
    throw InvalidArgument("ema_decay must lie in [0, 1)");
  }
  SensitivityProfile p;
  p.estimated_at_step = options.step;
  p.ema_decay = options.ema_decay;
  p.scheme_used = scheme;
  for (std::size_t pair = 0; pair < options.n_pairs; ++pair) {
    const KeySet base{derive_seed(seed, 2 * pair), {}};
    const auto c = replay_sensitivities(model, params, batch, scheme, base,
                                        derive_seed(seed, 2 * pair + 1), options);
    for (const auto& [slot, v] : c) p.c[slot] += v / static_cast<double>(options.n_pairs);
  }
  return p;
}

double gradient_variance(const ModelGraph& model, const Parameters& params, const Batch& batch,
                         const CompressionScheme& scheme, std::size_t n_draws,
                         const std::function<KeySet(std::size_t)>& keys_for, BackwardMode mode) {
  if (n_draws < 2) throw InvalidArgument("gradient variance needs at least 2 draws");
  std::vector<std::vector<double>> g(n_draws);
  parallel_for(n_draws, [&](std::size_t i) {
    g[i] = run_episode(model, params, batch, scheme, keys_for(i), mode).grads.flat();
  });
  const std::size_t d = g[0].size();
  double total = 0.0;
  const double n = static_cast<double>(n_draws);
  // Shifted by the first draw: identical gradients give exactly 0.
  for (std::size_t j = 0; j < d; ++j) {
    const double ref = g[0][j];
    double sum = 0.0, sq = 0.0;
    for (const auto& v : g) {
      const double x = v[j] - ref;
      sum += x;
      sq += x * x;
    }
    total += std::max(0.0, (sq - sum * sum / n) / (n - 1.0));
  }
  return total;
}

double brute_force_sensitivity(const ModelGraph& model, const Parameters& params, const Batch& batch,
                               const CompressionScheme& scheme, SlotId slot, int bits,
                               std::size_t n_draws, std::uint64_t seed) {
  if (n_draws < 100) throw InvalidArgument("brute-force sensitivity needs at least 100 draws");
  if (bits == kFullPrecisionBits) return 0.0;
  CompressionScheme s = scheme;
  s.forced_fullprec.erase(slot);
  s.bits_per_slot[slot] = bits;
  s.validate();
  const KeySet base{derive_seed(seed, 0), {}};
  const double v = gradient_variance(model, params, batch, s, n_draws, [&](std::size_t i) {
    return base.with_override(slot, derive_seed(seed, i + 1));
  });
  return v / bit_factor(bits);
}

SensitivityProfile update_profile(const SensitivityProfile& old, const SensitivityProfile& fresh) {
  if (old.c.size() != fresh.c.size()) throw InvalidArgument("profiles cover different slots");
  SensitivityProfile out = fresh;
  out.ema_decay = old.ema_decay;
  const double d = old.ema_decay;
  for (auto& [slot, v] : out.c) {
    const auto it = old.c.find(slot);
    if (it == old.c.end()) throw InvalidArgument("profiles cover different slots");
    if (std::isinf(it->second) || std::isinf(v)) {
      v = kPinnedSensitivity;
    } else {
      v = d * it->second + (1.0 - d) * v;
    }
  }
  return out;
}

void write_profile_csv(std::ostream& out, const SensitivityProfile& profile, const ContextPlan& plan,
                       const CompressionScheme& assigned) {
  out << "slot_id,node_kind,D_l,c_l,bits_assigned\n";
  out.precision(17);
  for (const auto& [slot, c] : profile.c) {
    const SlotInfo& info = plan.slot(slot);
    out << slot << ',' << to_string(info.node_kind) << ',' << info.dims << ',';
    if (std::isinf(c)) {
      out << "inf";
    } else {
      out << c;
    }
    out << ',' << assigned.bits_for(slot) << '\n';
  }
}

}  // namespace actc
