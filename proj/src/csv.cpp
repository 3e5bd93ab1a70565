#include "dengue/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include "dengue/error.hpp"

namespace dengue::csv {

namespace {

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw Error(ErrorKind::Validation, source + ": missing column '" + std::string(name) + "'");
}

std::string Table::where(std::size_t row) const { return source + ":" + std::to_string(lines.at(row)); }

Table parse(std::istream& in, std::string source) {
  Table table;
  table.source = std::move(source);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (line.empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorKind::Validation, table.source + ":" + std::to_string(line_no) + ": expected " +
                                             std::to_string(table.header.size()) + " fields, found " +
                                             std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.lines.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorKind::Validation, table.source + ": empty file (no header row)");
  return table;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return parse(in, path.string());
}

void require_header(const Table& table, const std::vector<std::string>& expected) {
  if (table.header != expected) {
    throw Error(ErrorKind::Validation, table.source + ": header must be '" + join(expected) + "', found '" +
                                           join(table.header) + "'");
  }
}

double parse_double(std::string_view text, const std::string& where) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw Error(ErrorKind::Validation, where + ": '" + std::string(text) + "' is not a number");
  }
  if (!std::isfinite(value)) throw Error(ErrorKind::Validation, where + ": non-finite value");
  return value;
}

std::int64_t parse_int(std::string_view text, const std::string& where) {
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw Error(ErrorKind::Validation, where + ": '" + std::string(text) + "' is not an integer");
  }
  return value;
}

std::uint64_t parse_uint(std::string_view text, const std::string& where) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw Error(ErrorKind::Validation, where + ": '" + std::string(text) + "' is not an unsigned integer");
  }
  return value;
}

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string join(const std::vector<std::string>& fields, char sep) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += sep;
    out += fields[i];
  }
  return out;
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace dengue::csv
