#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "actc/tape.hpp"

namespace actc {

struct Dataset {
  std::string name;
  Tensor inputs;
  std::vector<std::int64_t> labels;  // classification
  Tensor targets;                    // regression
  std::size_t num_classes = 0;       // 0 for regression

  [[nodiscard]] std::size_t size() const { return inputs.rank() == 2 ? inputs.rows() : 0; }
  [[nodiscard]] bool is_classification() const noexcept { return num_classes > 0; }
  [[nodiscard]] Batch batch(const std::vector<std::size_t>& rows) const;
  [[nodiscard]] Batch all() const;
};

/// Generator settings. `kind` is one of two_gaussians, gaussian_blobs,
/// two_moons, teacher_regression, idx.
struct DatasetSpec {
  std::string kind = "two_gaussians";
  std::size_t samples = 512;
  std::size_t features = 8;
  std::size_t classes = 2;
  /// Distance between class means in units of the noise std.
  double separation = 6.0;
  double noise = 0.1;
  std::size_t teacher_hidden = 16;
  std::size_t outputs = 1;
  std::uint64_t seed = 1;
  std::filesystem::path images;
  std::filesystem::path labels;
  /// Keep at most this many samples of an IDX file; 0 keeps all.
  std::size_t limit = 0;
};

[[nodiscard]] Dataset make_dataset(const DatasetSpec& spec, Precision precision = Precision::single);

/// Two isotropic unit-variance Gaussians whose means are `separation` apart.
[[nodiscard]] Dataset two_gaussians(std::size_t samples, std::size_t features, double separation,
                                    std::uint64_t seed, Precision precision = Precision::single);
/// `classes` unit-variance blobs with means drawn at scale `separation`.
[[nodiscard]] Dataset gaussian_blobs(std::size_t samples, std::size_t features, std::size_t classes,
                                     double separation, std::uint64_t seed,
                                     Precision precision = Precision::single);
/// Interleaved half circles in the first two features; extra features carry noise.
[[nodiscard]] Dataset two_moons(std::size_t samples, std::size_t features, double noise,
                                std::uint64_t seed, Precision precision = Precision::single);
/// Targets from a random tanh teacher network plus Gaussian noise.
[[nodiscard]] Dataset teacher_regression(std::size_t samples, std::size_t features,
                                         std::size_t hidden, std::size_t outputs, double noise,
                                         std::uint64_t seed, Precision precision = Precision::single);
/// IDX image/label pair (ubyte), pixels scaled to [0, 1] and flattened.
[[nodiscard]] Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                               std::size_t limit = 0, Precision precision = Precision::single);

/// `count` distinct row indices drawn uniformly for draw number `index` of `seed`.
[[nodiscard]] std::vector<std::size_t> sample_rows(std::size_t population, std::size_t count,
                                                   std::uint64_t seed, std::uint64_t index);

}  // namespace actc
