#pragma once

#include <cstdint>
#include <filesystem>

#include "actc/model.hpp"

namespace actc {

struct Checkpoint {
  std::int64_t step = 0;
  Parameters params;
};

/// Writes `manifest.json` (step, parameter names and shapes, payload file) and
/// `params.actt` (the tensors back to back) into `dir`.
void save_checkpoint(const std::filesystem::path& dir, const ModelGraph& model, const Parameters& params,
                     std::int64_t step);

/// Reads a checkpoint directory and checks it against `model`.
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& dir, const ModelGraph& model);

}  // namespace actc
