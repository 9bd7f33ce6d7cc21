#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "actc/datasets.hpp"
#include "actc/model.hpp"
#include "actc/scheme.hpp"
#include "actc/tape.hpp"

namespace actc {

/// One measured-vs-predicted line of a verification report.
struct TheoryRow {
  std::string experiment;
  std::string quantity;
  int bits = kFullPrecisionBits;
  double measured = 0.0;
  double predicted = 0.0;
  double ratio = 0.0;
  /// Human-readable acceptance rule, e.g. "< 0.15".
  std::string tolerance;
  bool pass = true;
};

struct TheoryReport {
  std::vector<TheoryRow> rows;
  std::map<std::string, std::string> metadata;

  [[nodiscard]] bool all_pass() const noexcept;
  void append(const TheoryReport& other);
  /// experiment,quantity,bits,measured,predicted,ratio,tolerance,verdict
  void write_csv(std::ostream& out) const;
  /// PASS/FAIL lines followed by the metadata.
  void write_summary(std::ostream& out) const;
};

/// ĝ = g(h) + J·Δh with Δh = Q(h) − h drawn under `scheme` and `keys`, J·Δh
/// by central differences through the backward map with step
/// t = 1e-3·‖h‖ / max(‖Δh‖, ε). Requires a smooth model in double precision.
[[nodiscard]] std::vector<double> linearized_gradient(const ModelGraph& model, const Parameters& params,
                                                      const Batch& batch, const CompressionScheme& scheme,
                                                      const KeySet& keys);

/// g evaluated on an explicitly supplied context: activation slots of the
/// raw store are replaced by `context` where present.
[[nodiscard]] std::vector<double> gradient_on_context(const ModelGraph& model, const ForwardResult& raw,
                                                      const std::map<SlotId, Tensor>& context);

struct ScanRow {
  int bits = 0;
  /// Mean over draws of ‖g(Q(h)) − ĝ‖.
  double mean_error = 0.0;
  /// Mean over draws of ‖Δh‖², the summed elementwise compression variance.
  double var_dh = 0.0;
  /// mean_error / ‖g(h)‖.
  double relative_error = 0.0;
};

struct LinearizationScan {
  std::vector<ScanRow> rows;
  /// Least-squares slope of log(mean_error) on log(var_dh) over width < 32 rows.
  double slope = 0.0;
};

[[nodiscard]] LinearizationScan linearization_error_scan(const ModelGraph& model, const Parameters& params,
                                                         const Batch& batch, const std::vector<int>& ladder,
                                                         std::size_t n_draws, std::uint64_t seed,
                                                         std::size_t group_size = kDefaultGroupSize);

struct Decomposition {
  double total = 0.0;
  double sampling = 0.0;
  double compression = 0.0;
  /// |total − sampling − compression| / total, 0 when total is 0.
  double residual = 0.0;
};

/// Grid of n_data minibatches (each a sorted random subset of `batch_size`
/// rows) times n_keys rounding keys; population variances summed over
/// gradient coordinates.
[[nodiscard]] Decomposition variance_decomposition(const ModelGraph& model, const Parameters& params,
                                                   const Dataset& data, const CompressionScheme& scheme,
                                                   std::size_t batch_size, std::size_t n_data,
                                                   std::size_t n_keys, std::uint64_t seed);

struct Additivity {
  double v_all = 0.0;
  /// Variance with only slot l compressed.
  std::map<SlotId, double> v_slot;
  double v_sum = 0.0;
  /// |V_all − Σ V_l| / V_all, 0 when V_all is 0.
  double residual = 0.0;
  /// predicted_variance with brute-force c (other slots compressed at fixed keys).
  double predicted = 0.0;
};

[[nodiscard]] Additivity additivity_check(const ModelGraph& model, const Parameters& params, const Batch& batch,
                                          const CompressionScheme& scheme, std::size_t n_keys,
                                          std::uint64_t seed);

/// 8 → 32 tanh → 32 tanh → 4 classes; six activation slots at any batch size ≥ 16.
[[nodiscard]] ModelGraph reference_tanh_mlp();
/// 8 → 32 tanh (saving its output) → 4 classes: input, hidden and probability slots.
[[nodiscard]] ModelGraph three_slot_mlp();
/// Four Gaussian blobs in 8 dimensions.
[[nodiscard]] Dataset reference_blobs(std::size_t samples, std::uint64_t seed, Precision precision = Precision::dbl);

}  // namespace actc
