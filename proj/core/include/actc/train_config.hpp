#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "actc/datasets.hpp"
#include "actc/model.hpp"

namespace actc {

enum class TrainMode { fp32, fixed_b, adaptive_b, checkpointed_adaptive };

[[nodiscard]] std::string_view to_string(TrainMode mode) noexcept;
[[nodiscard]] TrainMode parse_train_mode(std::string_view name);

struct TrainConfig {
  TrainMode mode = TrainMode::adaptive_b;
  double learning_rate = 0.1;
  double momentum = 0.0;
  std::int64_t steps = 500;
  std::size_t batch_size = 64;
  /// Target bits/dim; the uniform width in fixed_b mode and during warmup.
  double avg_bits = 4.0;
  std::int64_t adapt_interval = 100;
  double alert_threshold = 0.5;
  std::uint64_t seed = 0;
  double grad_ema_decay = 0.99;
  double sensitivity_ema_decay = 0.5;
  std::size_t n_pairs = 4;
  bool pin_loss_head = true;
  std::size_t min_slot_dims = 16;
  std::size_t group_size = 256;
  /// Save a checkpoint every this many steps (0: only the final one).
  std::int64_t checkpoint_every = 0;
  Precision precision = Precision::single;
  /// Where checkpoints go; empty disables them.
  std::filesystem::path output_dir;
  DatasetSpec dataset;
  /// Model description as JSON text.
  std::string model_json;

  [[nodiscard]] ModelGraph model() const;
  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

/// Strict parse: unknown keys anywhere are rejected. `model` is either an
/// inline object or a path, resolved against `base_dir` when relative.
/// Each override is "dotted.key=value" with the value read as JSON when it
/// parses and as a string otherwise; overrides apply before validation.
[[nodiscard]] TrainConfig parse_train_config(std::string_view text,
                                             const std::vector<std::string>& overrides = {},
                                             const std::filesystem::path& base_dir = {});
[[nodiscard]] TrainConfig load_train_config(const std::filesystem::path& path,
                                            const std::vector<std::string>& overrides = {});
/// Round-trippable JSON of the resolved configuration (model inlined).
[[nodiscard]] std::string to_json_text(const TrainConfig& config);

}  // namespace actc
