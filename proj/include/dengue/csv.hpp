#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dengue::csv {

/// A comma-separated table. Fields are taken verbatim; quoting is not
/// supported because none of the pipeline's files need it.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based source line of each row, for error messages.
  std::vector<std::size_t> lines;
  std::string source;

  /// Index of a header column; throws ValidationError naming the file.
  std::size_t column(std::string_view name) const;
  std::string where(std::size_t row) const;
};

Table parse(std::istream& in, std::string source);
Table read_file(const std::filesystem::path& path);

/// Requires the header to be exactly `expected`.
void require_header(const Table& table, const std::vector<std::string>& expected);

double parse_double(std::string_view text, const std::string& where);
std::int64_t parse_int(std::string_view text, const std::string& where);
std::uint64_t parse_uint(std::string_view text, const std::string& where);

/// Shortest representation that parses back to the identical double.
std::string format_double(double value);

std::string join(const std::vector<std::string>& fields, char sep = ',');

void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace dengue::csv
