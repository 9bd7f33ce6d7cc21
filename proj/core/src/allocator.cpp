#include "actc/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>

#include "actc/error.hpp"

namespace actc {

namespace {

struct Prepared {
  std::vector<int> ladder;          // ascending, unique
  std::vector<SlotId> free;         // ascending slot ids
  std::set<SlotId> pinned;
};

Prepared prepare(const AllocationProblem& p) {
  Prepared out;
  out.ladder = p.ladder;
  std::sort(out.ladder.begin(), out.ladder.end());
  out.ladder.erase(std::unique(out.ladder.begin(), out.ladder.end()), out.ladder.end());
  if (out.ladder.empty()) throw InvalidArgument("allocation ladder is empty");
  for (int b : out.ladder) {
    if (!is_codec_width(b) || b == kFullPrecisionBits) {
      throw InvalidArgument("ladder width " + std::to_string(b) + " is not a packed codec width");
    }
  }
  for (const auto& [slot, c] : p.c) {
    if (!p.dims.contains(slot)) throw InvalidArgument("slot " + std::to_string(slot) + " has no D_l");
    if (std::isnan(c) || c < 0.0) throw InvalidArgument("sensitivities must be nonnegative");
  }
  for (const auto& [slot, d] : p.dims) {
    if (!p.c.contains(slot)) throw InvalidArgument("slot " + std::to_string(slot) + " has no c_l");
    if (p.forced.contains(slot) || std::isinf(p.c.at(slot))) {
      out.pinned.insert(slot);
    } else {
      out.free.push_back(slot);
    }
  }
  std::uint64_t floor_bits = 0;
  for (SlotId s : out.free) floor_bits += static_cast<std::uint64_t>(out.ladder.front()) * p.dims.at(s);
  if (floor_bits > p.budget_bits) {
    throw InfeasibleBudget("budget of " + std::to_string(p.budget_bits) + " bits is below the " +
                           std::to_string(floor_bits) + " needed at " +
                           std::to_string(out.ladder.front()) + " bits everywhere");
  }
  return out;
}

CompressionScheme make_scheme(const AllocationProblem& p, const Prepared& prep,
                              const std::map<SlotId, int>& bits) {
  CompressionScheme s;
  s.group_size = p.group_size;
  s.bits_per_slot = bits;
  for (SlotId id : prep.pinned) {
    s.bits_per_slot[id] = kFullPrecisionBits;
    s.forced_fullprec.insert(id);
  }
  return s;
}

double term(double c, int bits) {
  const double s = bit_factor(bits);
  return s == 0.0 ? 0.0 : c * s;
}

}  // namespace

std::uint64_t budget_from_average(double avg_bits, const std::map<SlotId, std::size_t>& dims,
                                  const std::set<SlotId>& forced) {
  if (!(avg_bits > 0.0)) throw InvalidArgument("average bits must be positive");
  double total = 0.0;
  for (const auto& [slot, d] : dims) {
    if (!forced.contains(slot)) total += static_cast<double>(d);
  }
  return static_cast<std::uint64_t>(std::floor(avg_bits * total));
}

double predicted_variance(const std::map<SlotId, double>& c, const CompressionScheme& scheme) {
  double v = 0.0;
  for (const auto& [slot, cl] : c) v += term(cl, scheme.bits_for(slot));
  return v;
}

std::uint64_t scheme_bits(const AllocationProblem& p, const CompressionScheme& scheme) {
  std::uint64_t total = 0;
  for (const auto& [slot, d] : p.dims) {
    if (p.forced.contains(slot) || scheme.forced_fullprec.contains(slot)) continue;
    const auto it = p.c.find(slot);
    if (it != p.c.end() && std::isinf(it->second)) continue;
    total += static_cast<std::uint64_t>(scheme.bits_for(slot)) * d;
  }
  return total;
}

CompressionScheme allocate_bits(const AllocationProblem& p) {
  const Prepared prep = prepare(p);
  const auto& ladder = prep.ladder;
  std::map<SlotId, std::size_t> rung;
  std::uint64_t total = 0;
  for (SlotId s : prep.free) {
    rung[s] = ladder.size() - 1;
    total += static_cast<std::uint64_t>(ladder.back()) * p.dims.at(s);
  }

  struct Move {
    double ratio;
    SlotId slot;
    bool operator>(const Move& o) const { return ratio != o.ratio ? ratio > o.ratio : slot > o.slot; }
  };
  auto downgrade_ratio = [&](SlotId s) {
    const int b = ladder[rung[s]], lo = ladder[rung[s] - 1];
    const double dv = p.c.at(s) * (bit_factor(lo) - bit_factor(b));
    return dv / (static_cast<double>(p.dims.at(s)) * (b - lo));
  };
  std::priority_queue<Move, std::vector<Move>, std::greater<>> queue;
  for (SlotId s : prep.free) {
    if (rung[s] > 0) queue.push({downgrade_ratio(s), s});
  }
  while (total > p.budget_bits && !queue.empty()) {
    const Move m = queue.top();
    queue.pop();
    const SlotId s = m.slot;
    total -= static_cast<std::uint64_t>(ladder[rung[s]] - ladder[rung[s] - 1]) * p.dims.at(s);
    --rung[s];
    if (rung[s] > 0) queue.push({downgrade_ratio(s), s});
  }

  if (p.fill_slack) {
    // Upgrades that fit in the leftover budget, best variance reduction per bit first.
    auto fill = [&] {
      for (;;) {
        const std::uint64_t slack = p.budget_bits - total;
        double best = 0.0;
        std::optional<std::pair<SlotId, std::size_t>> pick;
        for (SlotId s : prep.free) {
          const int b = ladder[rung[s]];
          for (std::size_t up = rung[s] + 1; up < ladder.size(); ++up) {
            const std::uint64_t cost = static_cast<std::uint64_t>(ladder[up] - b) * p.dims.at(s);
            if (cost > slack) break;
            const double gain =
                p.c.at(s) * (bit_factor(b) - bit_factor(ladder[up])) / static_cast<double>(cost);
            if (!pick || gain > best) {
              best = gain;
              pick = {s, up};
            }
          }
        }
        if (!pick || best <= 0.0) break;
        const auto [s, up] = *pick;
        total += static_cast<std::uint64_t>(ladder[up] - ladder[rung[s]]) * p.dims.at(s);
        rung[s] = up;
      }
    };
    // Pairwise exchanges: move one slot down and another up when that lowers
    // the predicted variance within budget.
    auto exchange = [&] {
      bool changed = false;
      auto cost = [&](SlotId s, std::size_t r) {
        return static_cast<std::uint64_t>(ladder[r]) * p.dims.at(s);
      };
      auto var = [&](SlotId s, std::size_t r) { return term(p.c.at(s), ladder[r]); };
      for (bool improved = true; improved;) {
        improved = false;
        for (SlotId i : prep.free) {
          for (SlotId j : prep.free) {
            if (i == j) continue;
            const std::size_t ri = rung[i], rj = rung[j];
            const std::uint64_t base = total - cost(i, ri) - cost(j, rj);
            const double before = var(i, ri) + var(j, rj);
            double best = before;
            std::size_t bi = ri, bj = rj;
            for (std::size_t a = 0; a < ri; ++a) {
              for (std::size_t b = rj + 1; b < ladder.size(); ++b) {
                if (base + cost(i, a) + cost(j, b) > p.budget_bits) break;
                const double v = var(i, a) + var(j, b);
                if (v < best - 1e-12 * before) {
                  best = v;
                  bi = a;
                  bj = b;
                }
              }
            }
            if (bi != ri) {
              total = base + cost(i, bi) + cost(j, bj);
              rung[i] = bi;
              rung[j] = bj;
              improved = changed = true;
            }
          }
        }
      }
      return changed;
    };
    do {
      fill();
    } while (exchange());
  }

  std::map<SlotId, int> bits;
  for (SlotId s : prep.free) bits[s] = ladder[rung[s]];
  return make_scheme(p, prep, bits);
}

CompressionScheme exhaustive_allocate(const AllocationProblem& p) {
  const Prepared prep = prepare(p);
  const std::size_t n = prep.free.size();
  if (n > 8) throw InvalidArgument("exhaustive allocation is limited to 8 free slots, got " + std::to_string(n));
  const auto& ladder = prep.ladder;
  const std::size_t k = ladder.size();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= k;

  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_rungs;
  std::vector<std::size_t> r(n);
  for (std::size_t code = 0; code < combos; ++code) {
    // Highest widths first so that ties keep the larger assignment.
    std::size_t x = code;
    std::uint64_t total = 0;
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = k - 1 - x % k;
      x /= k;
      const SlotId s = prep.free[i];
      total += static_cast<std::uint64_t>(ladder[r[i]]) * p.dims.at(s);
      v += term(p.c.at(s), ladder[r[i]]);
    }
    if (total > p.budget_bits) continue;
    if (best_rungs.empty() || v < best) {
      best = v;
      best_rungs = r;
    }
  }
  std::map<SlotId, int> bits;
  for (std::size_t i = 0; i < n; ++i) bits[prep.free[i]] = ladder[best_rungs[i]];
  return make_scheme(p, prep, bits);
}

void write_scheme_csv(std::ostream& out, const AllocationProblem& p, const CompressionScheme& scheme) {
  out << "slot_id,D_l,c_l,b_l\n";
  out.precision(17);
  for (const auto& [slot, d] : p.dims) {
    const double c = p.c.at(slot);
    out << slot << ',' << d << ',';
    if (std::isinf(c)) {
      out << "inf";
    } else {
      out << c;
    }
    out << ',' << scheme.bits_for(slot) << '\n';
  }
}

}  // namespace actc
