#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace actc::cli {

struct CommonArgs {
  std::filesystem::path config;
  std::filesystem::path out = "actc_out";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const CommonArgs& args, std::ostream& out);
int cmd_profile(const CommonArgs& args, const std::filesystem::path& checkpoint, std::ostream& out);
int cmd_allocate(const CommonArgs& args, const std::filesystem::path& profile, std::optional<double> avg_bits,
                 std::ostream& out);
int cmd_verify(const std::string& suite, const CommonArgs& args, std::optional<std::size_t> draws,
               std::ostream& out);
int cmd_bench(const CommonArgs& args, std::size_t repeats, std::ostream& out);
int cmd_report(const std::vector<std::filesystem::path>& runs, const CommonArgs& args, std::ostream& out);

}  // namespace actc::cli
