#include "actc/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "actc/error.hpp"
#include "actc/ops.hpp"
#include "actc/rng.hpp"

namespace actc {

namespace {

constexpr std::uint64_t kDataStream = 0xDA7A0000ULL;

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated IDX header in " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

Batch Dataset::batch(const std::vector<std::size_t>& rows) const {
  if (rows.empty()) throw InvalidArgument("batch needs at least one row");
  const std::size_t f = inputs.cols();
  Batch b;
  b.inputs = Tensor({rows.size(), f}, inputs.precision());
  if (!is_classification()) b.targets = Tensor({rows.size(), targets.cols()}, targets.precision());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= size()) throw InvalidArgument("row " + std::to_string(r) + " out of range");
    for (std::size_t j = 0; j < f; ++j) b.inputs.at(i, j) = inputs.at(r, j);
    if (is_classification()) {
      b.labels.push_back(labels[r]);
    } else {
      for (std::size_t j = 0; j < targets.cols(); ++j) b.targets.at(i, j) = targets.at(r, j);
    }
  }
  return b;
}

Batch Dataset::all() const {
  std::vector<std::size_t> rows(size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return batch(rows);
}

Dataset two_gaussians(std::size_t samples, std::size_t features, double separation, std::uint64_t seed,
                      Precision precision) {
  if (samples < 2 || features == 0) throw InvalidArgument("two_gaussians needs samples >= 2 and features >= 1");
  Dataset d;
  d.name = "two_gaussians";
  d.num_classes = 2;
  d.inputs = Tensor({samples, features}, Precision::dbl);
  const StreamKey key{seed, kDataStream + 1};
  const double shift = 0.5 * separation / std::sqrt(static_cast<double>(features));
  for (std::size_t i = 0; i < samples; ++i) {
    const std::int64_t y = static_cast<std::int64_t>(i % 2);
    d.labels.push_back(y);
    for (std::size_t j = 0; j < features; ++j) {
      d.inputs.at(i, j) = counter_normal(key, i * features + j) + (y ? shift : -shift);
    }
  }
  d.inputs.set_precision(precision);
  return d;
}

Dataset gaussian_blobs(std::size_t samples, std::size_t features, std::size_t classes, double separation,
                       std::uint64_t seed, Precision precision) {
  if (classes < 2 || samples < classes || features == 0) {
    throw InvalidArgument("gaussian_blobs needs classes >= 2, samples >= classes, features >= 1");
  }
  Dataset d;
  d.name = "gaussian_blobs";
  d.num_classes = classes;
  d.inputs = Tensor({samples, features}, Precision::dbl);
  const StreamKey centers{seed, kDataStream + 2};
  const StreamKey noise{seed, kDataStream + 3};
  const double scale = separation / std::sqrt(2.0 * static_cast<double>(features));
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t y = i % classes;
    d.labels.push_back(static_cast<std::int64_t>(y));
    for (std::size_t j = 0; j < features; ++j) {
      d.inputs.at(i, j) = scale * counter_normal(centers, y * features + j) +
                          counter_normal(noise, i * features + j);
    }
  }
  d.inputs.set_precision(precision);
  return d;
}

Dataset two_moons(std::size_t samples, std::size_t features, double noise, std::uint64_t seed,
                  Precision precision) {
  if (samples < 2 || features < 2) throw InvalidArgument("two_moons needs samples >= 2 and features >= 2");
  Dataset d;
  d.name = "two_moons";
  d.num_classes = 2;
  d.inputs = Tensor({samples, features}, Precision::dbl);
  const StreamKey angle{seed, kDataStream + 4};
  const StreamKey jitter{seed, kDataStream + 5};
  for (std::size_t i = 0; i < samples; ++i) {
    const std::int64_t y = static_cast<std::int64_t>(i % 2);
    d.labels.push_back(y);
    const double t = std::numbers::pi * counter_rng(angle, i);
    const double px = y ? 1.0 - std::cos(t) : std::cos(t);
    const double py = y ? 0.5 - std::sin(t) : std::sin(t);
    d.inputs.at(i, 0) = px + noise * counter_normal(jitter, i * features);
    d.inputs.at(i, 1) = py + noise * counter_normal(jitter, i * features + 1);
    for (std::size_t j = 2; j < features; ++j) d.inputs.at(i, j) = noise * counter_normal(jitter, i * features + j);
  }
  d.inputs.set_precision(precision);
  return d;
}

Dataset teacher_regression(std::size_t samples, std::size_t features, std::size_t hidden, std::size_t outputs,
                           double noise, std::uint64_t seed, Precision precision) {
  if (samples == 0 || features == 0 || hidden == 0 || outputs == 0) {
    throw InvalidArgument("teacher_regression needs positive sizes");
  }
  Dataset d;
  d.name = "teacher_regression";
  d.inputs = Tensor({samples, features}, Precision::dbl);
  const StreamKey xs{seed, kDataStream + 6};
  for (std::size_t i = 0; i < d.inputs.numel(); ++i) d.inputs[i] = counter_normal(xs, i);
  const StreamKey wk{seed, kDataStream + 7};
  Tensor w1({features, hidden}, Precision::dbl), w2({hidden, outputs}, Precision::dbl);
  for (std::size_t i = 0; i < w1.numel(); ++i) w1[i] = counter_normal(wk, i) / std::sqrt(double(features));
  for (std::size_t i = 0; i < w2.numel(); ++i) w2[i] = counter_normal(wk, w1.numel() + i) / std::sqrt(double(hidden));
  const Tensor h = tanh_forward(linear_forward(d.inputs, w1, Tensor({hidden}, Precision::dbl)));
  d.targets = linear_forward(h, w2, Tensor({outputs}, Precision::dbl));
  const StreamKey nk{seed, kDataStream + 8};
  for (std::size_t i = 0; i < d.targets.numel(); ++i) d.targets[i] += noise * counter_normal(nk, i);
  d.inputs.set_precision(precision);
  d.targets.set_precision(precision);
  return d;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t limit,
                 Precision precision) {
  std::ifstream fi(images, std::ios::binary), fl(labels, std::ios::binary);
  if (!fi) throw ConfigError("cannot open IDX images " + images.string());
  if (!fl) throw ConfigError("cannot open IDX labels " + labels.string());
  if (read_be32(fi, images) != 0x00000803u) throw FormatError(images.string() + " is not an IDX ubyte image file");
  if (read_be32(fl, labels) != 0x00000801u) throw FormatError(labels.string() + " is not an IDX ubyte label file");
  std::size_t n = read_be32(fi, images);
  const std::size_t rows = read_be32(fi, images), cols = read_be32(fi, images);
  if (read_be32(fl, labels) != n) throw FormatError("IDX image and label counts differ");
  if (limit > 0 && limit < n) n = limit;
  if (n == 0 || rows * cols == 0) throw FormatError("IDX files hold no samples");
  Dataset d;
  d.name = "idx";
  d.inputs = Tensor({n, rows * cols}, Precision::dbl);
  std::vector<unsigned char> px(rows * cols);
  std::int64_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!fi.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()))) {
      throw FormatError("truncated IDX image data in " + images.string());
    }
    for (std::size_t j = 0; j < px.size(); ++j) d.inputs.at(i, j) = px[j] / 255.0;
    char y = 0;
    if (!fl.get(y)) throw FormatError("truncated IDX label data in " + labels.string());
    d.labels.push_back(static_cast<unsigned char>(y));
    max_label = std::max<std::int64_t>(max_label, d.labels.back());
  }
  d.num_classes = static_cast<std::size_t>(max_label) + 1;
  if (d.num_classes < 2) d.num_classes = 2;
  d.inputs.set_precision(precision);
  return d;
}

Dataset make_dataset(const DatasetSpec& s, Precision precision) {
  if (s.kind == "two_gaussians") return two_gaussians(s.samples, s.features, s.separation, s.seed, precision);
  if (s.kind == "gaussian_blobs") {
    return gaussian_blobs(s.samples, s.features, s.classes, s.separation, s.seed, precision);
  }
  if (s.kind == "two_moons") return two_moons(s.samples, s.features, s.noise, s.seed, precision);
  if (s.kind == "teacher_regression") {
    return teacher_regression(s.samples, s.features, s.teacher_hidden, s.outputs, s.noise, s.seed, precision);
  }
  if (s.kind == "idx") return load_idx(s.images, s.labels, s.limit, precision);
  throw ConfigError("unknown dataset kind '" + s.kind + "'");
}

std::vector<std::size_t> sample_rows(std::size_t population, std::size_t count, std::uint64_t seed,
                                     std::uint64_t index) {
  if (count == 0 || count > population) {
    throw InvalidArgument("cannot draw " + std::to_string(count) + " rows from " + std::to_string(population));
  }
  std::vector<std::size_t> rows(population);
  for (std::size_t i = 0; i < population; ++i) rows[i] = i;
  const StreamKey key{derive_seed(seed, index), kDataStream + 9};
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t span = population - i;
    const std::size_t j = i + std::min(span - 1, static_cast<std::size_t>(counter_rng(key, i) * span));
    std::swap(rows[i], rows[j]);
  }
  rows.resize(count);
  return rows;
}

}  // namespace actc
