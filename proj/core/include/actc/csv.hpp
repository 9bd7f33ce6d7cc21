#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace actc {

/// Comma-separated table with a header row. Fields are not quoted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws FormatError when absent.
  [[nodiscard]] std::size_t column(std::string_view name) const;
  [[nodiscard]] double number(std::size_t row, std::string_view name) const;
};

[[nodiscard]] CsvTable parse_csv(std::istream& in);
[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path);

}  // namespace actc
