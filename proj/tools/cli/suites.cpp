#include "suites.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "actc/allocator.hpp"
#include "actc/error.hpp"
#include "actc/kernels.hpp"
#include "actc/parallel.hpp"
#include "actc/quantizer.hpp"
#include "actc/rng.hpp"

namespace actc::cli {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

TheoryRow row(std::string experiment, std::string quantity, int bits, double measured, double predicted,
              std::string tolerance, bool pass) {
  TheoryRow r;
  r.experiment = std::move(experiment);
  r.quantity = std::move(quantity);
  r.bits = bits;
  r.measured = measured;
  r.predicted = predicted;
  r.ratio = predicted != 0.0 ? measured / predicted : 0.0;
  r.tolerance = std::move(tolerance);
  r.pass = pass;
  return r;
}

Tensor suite_tensor(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  Tensor t({n}, Precision::single);
  const StreamKey k{seed, stream};
  for (std::size_t i = 0; i < n; ++i) t[i] = counter_normal(k, i);
  t.apply_precision();
  return t;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"quantizer", "prop1", "prop2", "additivity", "allocator"};
  return names;
}

TheoryReport run_suite(const std::string& name, const SuiteOptions& o) {
  if (name == "quantizer") return quantizer_suite(o);
  if (name == "prop1") return prop1_suite(o);
  if (name == "prop2") return prop2_suite(o);
  if (name == "additivity") return additivity_suite(o);
  if (name == "allocator") return allocator_suite(o);
  throw InvalidArgument("unknown verification suite '" + name + "'");
}

static double float_ulp(double v) {
  const float f = static_cast<float>(v);
  return static_cast<double>(std::nextafter(f, std::numeric_limits<float>::infinity()) - f);
}

TheoryReport quantizer_suite(const SuiteOptions& o) {
  TheoryReport rep;
  const std::size_t n = 1024, draws = o.draws.value_or(20000);
  const Tensor x = suite_tensor(n, o.seed, 1);
  for (int b : kBitLadder) {
    const GroupStats gs = group_minmax(x, kDefaultGroupSize);
    std::vector<double> sum(n, 0.0), sq(n, 0.0);
    for (std::size_t d = 0; d < draws; ++d) {
      const Tensor y = dequantize(quantize(x, b, kDefaultGroupSize, {derive_seed(o.seed, d), 7}));
      for (std::size_t j = 0; j < n; ++j) {
        sum[j] += y[j];
        sq[j] += y[j] * y[j];
      }
    }
    std::size_t biased = 0, above_bound = 0;
    const double L = std::ldexp(1.0, b) - 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t g = j / kDefaultGroupSize;
      const double r = gs.ranges[g];
      const double mean = sum[j] / static_cast<double>(draws);
      double var = sq[j] / static_cast<double>(draws) - mean * mean;
      if (var < 0.0) var = 0.0;
      // Bernoulli spread of the two neighbouring levels.
      const double step = r / L;
      const double t = r > 0.0 ? (x[j] - gs.mins[g]) / step : 0.0;
      const double p = t - std::floor(t);
      const double sigma = step * std::sqrt(p * (1.0 - p) / static_cast<double>(draws));
      // Decoded levels are stored in single precision, so each may sit half an ulp off the exact grid.
      const double ulp = float_ulp(std::abs(x[j]) + r);
      if (std::abs(mean - x[j]) > 4.0 * sigma + ulp) ++biased;
      const double half_gap = 0.5 * step + ulp;
      if (var > half_gap * half_gap * (1.0 + 1e-9)) ++above_bound;
    }
    rep.rows.push_back(row("quantizer", "unbiasedness_violations", b, static_cast<double>(biased), 0.0, "== 0",
                           biased == 0));
    rep.rows.push_back(row("quantizer", "variance_bound_violations", b, static_cast<double>(above_bound), 0.0,
                           "== 0", above_bound == 0));
  }
  for (int b : kBitLadder) {
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < 100; ++i) {
      const Tensor t = suite_tensor(300 + 7 * i, o.seed, 100 + i);
      const QuantizedTensor q = quantize(t, b, kDefaultGroupSize, {o.seed, i});
      const QuantizedTensor q2 = quantize(dequantize(q), b, kDefaultGroupSize, {derive_seed(o.seed, 1000 + i), i});
      if (!same_payload(q, q2)) ++mismatches;
    }
    rep.rows.push_back(row("quantizer", "idempotence_mismatches", b, static_cast<double>(mismatches), 0.0, "== 0",
                           mismatches == 0));
  }
  const QuantizedTensor raw = quantize(x, kFullPrecisionBits, kDefaultGroupSize, {o.seed, 0});
  const bool exact = dequantize(raw) == x;
  rep.rows.push_back(row("quantizer", "raw_roundtrip_exact", kFullPrecisionBits, exact ? 1.0 : 0.0, 1.0, "== 1",
                         exact));
  rep.metadata["quantizer.draws"] = std::to_string(draws);
  rep.metadata["quantizer.elements"] = std::to_string(n);
  return rep;
}

TheoryReport prop1_suite(const SuiteOptions& o) {
  const ModelGraph model = reference_tanh_mlp();
  const Parameters params = model.init_params(o.seed, Precision::dbl);
  const Batch batch = reference_blobs(64, o.seed).all();
  const std::size_t draws = o.draws.value_or(200);
  const LinearizationScan scan = linearization_error_scan(model, params, batch, {3, 4, 5, 6, 8}, draws, o.seed);
  TheoryReport rep;
  for (const ScanRow& r : scan.rows) {
    rep.rows.push_back(row("prop1", "mean_linearization_error", r.bits, r.mean_error, r.var_dh, "reported", true));
  }
  rep.rows.push_back(row("prop1", "loglog_slope", kFullPrecisionBits, scan.slope, 1.0, "in [0.8, 1.2]",
                         scan.slope >= 0.8 && scan.slope <= 1.2));
  const auto high = std::find_if(scan.rows.begin(), scan.rows.end(), [](const ScanRow& r) { return r.bits == 8; });
  if (high != scan.rows.end()) {
    rep.rows.push_back(row("prop1", "relative_error_at_8_bits", 8, high->relative_error, 1e-3, "< 0.001",
                           high->relative_error < 1e-3));
  }
  rep.metadata["prop1.draws"] = std::to_string(draws);
  rep.metadata["prop1.model"] = "8-32-32-4 tanh MLP, batch 64, double precision";
  return rep;
}

TheoryReport prop2_suite(const SuiteOptions& o) {
  const ModelGraph model = reference_tanh_mlp();
  const Parameters params = model.init_params(o.seed, Precision::dbl);
  const Dataset data = reference_blobs(512, o.seed);
  const std::size_t n = o.draws.value_or(64);
  const ContextPlan plan = model.plan(64);
  const Decomposition d =
      variance_decomposition(model, params, data, CompressionScheme::uniform(plan.activation_slots(), 4), 64, n, n,
                             o.seed);
  TheoryReport rep;
  rep.rows.push_back(row("prop2", "total_variance", 4, d.total, d.sampling + d.compression, "reported", true));
  rep.rows.push_back(row("prop2", "sampling_variance", 4, d.sampling, 0.0, "reported", true));
  rep.rows.push_back(row("prop2", "compression_variance", 4, d.compression, 0.0, "reported", true));
  rep.rows.push_back(row("prop2", "relative_residual", 4, d.residual, 0.15, "< 0.15", d.residual < 0.15));
  rep.metadata["prop2.grid"] = std::to_string(n) + " x " + std::to_string(n);
  return rep;
}

TheoryReport additivity_suite(const SuiteOptions& o) {
  const ModelGraph model = three_slot_mlp();
  const Parameters params = model.init_params(o.seed, Precision::dbl);
  const Batch batch = reference_blobs(64, o.seed).all();
  const std::size_t n = o.draws.value_or(500);
  const ContextPlan plan = model.plan(batch.size());
  const Additivity a =
      additivity_check(model, params, batch, CompressionScheme::uniform(plan.activation_slots(), 8), n, o.seed);
  TheoryReport rep;
  for (const auto& [slot, v] : a.v_slot) {
    rep.rows.push_back(row("additivity", "V_" + plan.slot(slot).label, 8, v, 0.0, "reported", true));
  }
  rep.rows.push_back(row("additivity", "V_all", 8, a.v_all, a.v_sum, "reported", true));
  rep.rows.push_back(row("additivity", "relative_residual", 8, a.residual, 0.2, "< 0.2", a.residual < 0.2));
  const double gap = a.v_sum > 0.0 ? std::abs(a.predicted - a.v_sum) / a.v_sum : 0.0;
  rep.rows.push_back(row("additivity", "predicted_vs_sum_gap", 8, gap, 0.2, "< 0.2", gap < 0.2));
  rep.metadata["additivity.draws"] = std::to_string(n);
  return rep;
}

AllocatorGapStats allocator_gap_study(std::size_t instances, std::uint64_t seed) {
  AllocatorGapStats s;
  s.instances = instances;
  std::vector<double> gaps(instances);
  std::vector<int> over(instances, 0), mono(instances, 0);
  parallel_for(instances, [&](std::size_t i) {
    const StreamKey k{seed, i};
    std::uint64_t c = 0;
    AllocationProblem p;
    const std::size_t L = 1 + static_cast<std::size_t>(counter_rng(k, c++) * 6.0);
    std::size_t total = 0;
    for (std::size_t l = 0; l < L; ++l) {
      p.c[l] = std::pow(10.0, -3.0 + 6.0 * counter_rng(k, c++));
      p.dims[l] = 16 + static_cast<std::size_t>(counter_rng(k, c++) * 4080.0);
      total += p.dims[l];
    }
    const double avg = 2.0 + 6.0 * counter_rng(k, c++);
    p.budget_bits = static_cast<std::uint64_t>(avg * static_cast<double>(total));
    const CompressionScheme g = allocate_bits(p);
    const CompressionScheme e = exhaustive_allocate(p);
    const double vg = predicted_variance(p.c, g), ve = predicted_variance(p.c, e);
    gaps[i] = ve > 0.0 ? vg / ve : 1.0;
    over[i] = scheme_bits(p, g) > p.budget_bits;
    AllocationProblem wider = p;
    wider.budget_bits += static_cast<std::uint64_t>(counter_rng(k, c++) * static_cast<double>(total));
    mono[i] = predicted_variance(p.c, allocate_bits(wider)) > vg * (1.0 + 1e-12);
  });
  for (std::size_t i = 0; i < instances; ++i) {
    s.within_5pct += gaps[i] <= 1.05;
    s.budget_violations += over[i];
    s.monotonicity_violations += mono[i];
  }
  std::sort(gaps.begin(), gaps.end());
  if (!gaps.empty()) {
    s.p95_gap = gaps[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(instances))) - 1];
    s.max_gap = gaps.back();
  }
  return s;
}

TheoryReport allocator_suite(const SuiteOptions& o) {
  const std::size_t n = o.draws.value_or(1000);
  const AllocatorGapStats s = allocator_gap_study(n, o.seed);
  const double frac = static_cast<double>(s.within_5pct) / static_cast<double>(n);
  TheoryReport rep;
  rep.rows.push_back(row("allocator", "fraction_within_5pct", kFullPrecisionBits, frac, 0.95, ">= 0.95", frac >= 0.95));
  rep.rows.push_back(row("allocator", "p95_gap", kFullPrecisionBits, s.p95_gap, 1.05, "<= 1.05", s.p95_gap <= 1.05));
  rep.rows.push_back(row("allocator", "budget_violations", kFullPrecisionBits, double(s.budget_violations), 0.0,
                         "== 0", s.budget_violations == 0));
  rep.rows.push_back(row("allocator", "monotonicity_violations", kFullPrecisionBits,
                         double(s.monotonicity_violations), 0.0, "== 0", s.monotonicity_violations == 0));
  rep.metadata["allocator.instances"] = std::to_string(n);
  rep.metadata["allocator.max_gap"] = num(s.max_gap);
  return rep;
}

}  // namespace actc::cli
