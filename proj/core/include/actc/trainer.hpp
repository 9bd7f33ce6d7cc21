#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "actc/allocator.hpp"
#include "actc/datasets.hpp"
#include "actc/sensitivity.hpp"
#include "actc/tape.hpp"
#include "actc/train_config.hpp"

namespace actc {

struct MetricsRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  /// Σ c_l·S(b_l) from the latest profile (0 before the first one).
  double predicted_variance = 0.0;
  double ema_grad_variance = 0.0;
  bool alert = false;
  double avg_bits_actual = 32.0;
  double compression_ratio = 1.0;
  double wall_ms = 0.0;
};

/// Running estimate of the minibatch gradient variance, EMA‖g‖² − ‖EMA g‖²,
/// with the usual 1 − decayᵗ bias correction.
struct GradVarianceState {
  double decay = 0.99;
  std::vector<double> mean;
  double mean_sq_norm = 0.0;
  std::int64_t count = 0;

  [[nodiscard]] double variance() const noexcept;
};

[[nodiscard]] GradVarianceState update_grad_variance_ema(GradVarianceState state,
                                                         std::span<const double> gradient);

/// True iff V > ρ·max(grad_var, 1e-12).
[[nodiscard]] bool compression_alert(double predicted_variance, double grad_variance, double rho) noexcept;

struct SgdState {
  /// Momentum buffers, created on the first step.
  std::vector<Tensor> velocity;
};

struct StepResult {
  Parameters params;
  Episode episode;
};

/// One compressed forward/backward and an SGD (optionally momentum) update:
/// v ← μ·v + g, θ ← θ − η·v.
[[nodiscard]] StepResult act_step(const ModelGraph& model, const Parameters& params, const Batch& batch,
                                  const CompressionScheme& scheme, const KeySet& keys, double learning_rate,
                                  double momentum, SgdState& state, BackwardMode mode = BackwardMode::plain);

struct RefreshRecord {
  std::int64_t step = 0;
  SensitivityProfile profile;
  CompressionScheme scheme;
};

struct TrainResult {
  TrainConfig config;
  ContextPlan plan;
  Parameters params;
  std::vector<MetricsRecord> metrics;
  std::vector<RefreshRecord> refreshes;
  CompressionScheme final_scheme;
  /// Loss and accuracy of the final parameters on the whole dataset (accuracy
  /// is absent for regression).
  double final_loss = 0.0;
  std::optional<double> final_accuracy;
  std::size_t alert_count = 0;
};

/// Activation slots excluded from the bit budget under `config`.
[[nodiscard]] std::set<SlotId> budget_exclusions(const TrainConfig& config, const ContextPlan& plan);

/// The scheme used before the first refresh (and throughout fixed_b).
[[nodiscard]] CompressionScheme initial_scheme(const TrainConfig& config, const ContextPlan& plan);

/// Runs the configured loop. Throws DivergenceError on a non-finite loss or gradient.
[[nodiscard]] TrainResult train(const TrainConfig& config);
[[nodiscard]] TrainResult train(const TrainConfig& config, const Dataset& data);

/// Classification accuracy of `params` on the dataset (fp32 context).
[[nodiscard]] double accuracy(const ModelGraph& model, const Parameters& params, const Dataset& data);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& metrics);
/// One row per (refresh_step, slot): refresh_step,slot_id,node_kind,D_l,c_l,bits.
void write_sensitivity_evolution_csv(std::ostream& out, const TrainResult& result);
/// Final loss/accuracy, mode, average bits, compression ratio, alert count.
[[nodiscard]] std::string summary_json_text(const TrainResult& result);

}  // namespace actc
