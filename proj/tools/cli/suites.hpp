#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "actc/theorycheck.hpp"

namespace actc::cli {

/// Knobs shared by the verification suites; unset fields use each suite's pinned default.
struct SuiteOptions {
  std::uint64_t seed = 20240601;
  std::optional<std::size_t> draws;
};

[[nodiscard]] const std::vector<std::string>& suite_names();

/// Throws InvalidArgument for an unknown name.
[[nodiscard]] TheoryReport run_suite(const std::string& name, const SuiteOptions& options);

[[nodiscard]] TheoryReport quantizer_suite(const SuiteOptions& options);
[[nodiscard]] TheoryReport prop1_suite(const SuiteOptions& options);
[[nodiscard]] TheoryReport prop2_suite(const SuiteOptions& options);
[[nodiscard]] TheoryReport additivity_suite(const SuiteOptions& options);
[[nodiscard]] TheoryReport allocator_suite(const SuiteOptions& options);

/// Random allocation instances used by the allocator suite.
struct AllocatorGapStats {
  std::size_t instances = 0;
  std::size_t within_5pct = 0;
  double p95_gap = 0.0;
  double max_gap = 0.0;
  std::size_t budget_violations = 0;
  std::size_t monotonicity_violations = 0;
};

[[nodiscard]] AllocatorGapStats allocator_gap_study(std::size_t instances, std::uint64_t seed);

}  // namespace actc::cli
