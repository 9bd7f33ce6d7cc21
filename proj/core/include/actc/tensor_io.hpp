#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "actc/tensor.hpp"

namespace actc {

inline constexpr std::uint32_t kTensorFormatVersion = 1;

/// Little-endian binary: "ACTT", version u32, rank u32, extents u64[rank],
/// precision u8, then numel scalars (float32 or float64 by precision).
void write_tensor(std::ostream& out, const Tensor& t);
[[nodiscard]] Tensor read_tensor(std::istream& in);

void save_tensors(const std::filesystem::path& path, const std::vector<Tensor>& tensors);
[[nodiscard]] std::vector<Tensor> load_tensors(const std::filesystem::path& path);

namespace io {
void put_u8(std::ostream& out, std::uint8_t v);
void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f32(std::ostream& out, float v);
void put_f64(std::ostream& out, double v);
[[nodiscard]] std::uint8_t get_u8(std::istream& in);
[[nodiscard]] std::uint32_t get_u32(std::istream& in);
[[nodiscard]] std::uint64_t get_u64(std::istream& in);
[[nodiscard]] float get_f32(std::istream& in);
[[nodiscard]] double get_f64(std::istream& in);
void expect_magic(std::istream& in, const char (&magic)[5]);
}  // namespace io

}  // namespace actc
