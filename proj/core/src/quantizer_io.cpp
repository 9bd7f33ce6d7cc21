#include <istream>
#include <ostream>

#include "actc/error.hpp"
#include "actc/kernels.hpp"
#include "actc/quantizer.hpp"
#include "actc/tensor_io.hpp"

namespace actc {

namespace {

void put_scalar(std::ostream& out, Precision p, double v) {
  if (p == Precision::single) {
    io::put_f32(out, static_cast<float>(v));
  } else {
    io::put_f64(out, v);
  }
}

double get_scalar(std::istream& in, Precision p) {
  return p == Precision::single ? static_cast<double>(io::get_f32(in)) : io::get_f64(in);
}

}  // namespace

void write_quantized(std::ostream& out, const QuantizedTensor& q) {
  out.write("ACTQ", 4);
  io::put_u32(out, kQuantFormatVersion);
  io::put_u32(out, static_cast<std::uint32_t>(q.shape.size()));
  for (std::size_t e : q.shape) io::put_u64(out, e);
  io::put_u8(out, static_cast<std::uint8_t>(q.precision));
  io::put_u32(out, static_cast<std::uint32_t>(q.bits));
  io::put_u64(out, q.group_size);
  io::put_u64(out, q.key.seed);
  io::put_u64(out, q.key.stream_id);
  if (q.bits == kFullPrecisionBits) {
    if (!q.raw_fallback) throw FormatError("uncompressed payload is missing its raw data");
    for (double v : q.raw_fallback->data()) put_scalar(out, q.precision, v);
  } else {
    if (q.words.size() != packed_words(q.numel(), q.bits)) {
      throw FormatError("refusing to write a corrupted packed payload");
    }
    for (std::size_t g = 0; g < q.mins.size(); ++g) {
      put_scalar(out, q.precision, q.mins[g]);
      put_scalar(out, q.precision, q.ranges[g]);
    }
    for (std::uint64_t w : q.words) io::put_u64(out, w);
  }
  if (!out) throw FormatError("failed to write quantized tensor");
}

QuantizedTensor read_quantized(std::istream& in) {
  io::expect_magic(in, "ACTQ");
  const std::uint32_t version = io::get_u32(in);
  if (version != kQuantFormatVersion) {
    throw FormatError("unsupported quantized format version " + std::to_string(version));
  }
  QuantizedTensor q;
  const std::uint32_t rank = io::get_u32(in);
  if (rank == 0 || rank > 16) throw FormatError("implausible rank " + std::to_string(rank));
  q.shape.resize(rank);
  for (auto& e : q.shape) {
    e = io::get_u64(in);
    if (e == 0) throw FormatError("zero extent in serialized tensor");
  }
  const std::uint8_t prec = io::get_u8(in);
  if (prec > 1) throw FormatError("unknown precision tag " + std::to_string(prec));
  q.precision = static_cast<Precision>(prec);
  q.bits = static_cast<int>(io::get_u32(in));
  if (!is_codec_width(q.bits)) throw FormatError("unsupported bit width " + std::to_string(q.bits));
  q.group_size = io::get_u64(in);
  if (q.group_size < 2) throw FormatError("group size below 2");
  q.key.seed = io::get_u64(in);
  q.key.stream_id = io::get_u64(in);
  const std::size_t n = shape_numel(q.shape);
  if (q.bits == kFullPrecisionBits) {
    std::vector<double> raw(n);
    for (double& v : raw) v = get_scalar(in, q.precision);
    q.raw_fallback = Tensor(q.shape, std::move(raw), q.precision);
    return q;
  }
  const std::size_t groups = num_groups(n, q.group_size);
  q.mins.resize(groups);
  q.ranges.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    q.mins[g] = get_scalar(in, q.precision);
    q.ranges[g] = get_scalar(in, q.precision);
  }
  q.words.resize(packed_words(n, q.bits));
  for (auto& w : q.words) w = io::get_u64(in);
  return q;
}

}  // namespace actc
