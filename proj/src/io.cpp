#include "dengue/io.hpp"

#include "dengue/csv.hpp"
#include "dengue/error.hpp"

namespace dengue::io {

namespace {

const std::vector<std::string> kClimateHeader = {"district", "date", "temp_c", "rh_pct"};
const std::vector<std::string> kRainHeader = {"district", "iso_year", "iso_week", "rain_mm"};
const std::vector<std::string> kLarvalHeader = {"district", "year", "month", "n_low", "n_mid", "n_high"};
const std::vector<std::string> kCasesHeader = {"district", "year", "month", "cases"};
const std::vector<std::string> kRecordsHeader = {"district", "year",       "month",        "temp_mean",
                                                 "rh_mean",  "rain_total", "larval_index", "cases"};

YearMonth parse_month(const std::string& year, const std::string& month, const std::string& where) {
  YearMonth ym{static_cast<int>(csv::parse_int(year, where)), static_cast<int>(csv::parse_int(month, where))};
  if (!ym.valid()) throw Error(ErrorKind::Validation, where + ": month " + month + " outside [1, 12]");
  return ym;
}

std::string require_district(const std::string& d, const std::string& where) {
  if (d.empty()) throw Error(ErrorKind::Validation, where + ": empty district");
  return d;
}

// Re-throws a validation failure with the row's file:line prefix.
template <typename Fn>
auto at_row(const std::string& where, Fn fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Validation) throw;
    const std::string msg = e.what();
    if (msg.find(where) != std::string::npos) throw;
    throw Error(ErrorKind::Validation, where + ": " + msg);
  }
}

}  // namespace

std::vector<RawClimateReading> read_climate(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  csv::require_header(table, kClimateHeader);
  std::vector<RawClimateReading> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = table.where(i);
    RawClimateReading r;
    r.district = require_district(row[0], where);
    r.date = at_row(where, [&] { return parse_date(row[1]); });
    r.temperature = csv::parse_double(row[2], where);
    r.relative_humidity = csv::parse_double(row[3], where);
    if (!(r.relative_humidity >= 0.0 && r.relative_humidity <= 100.0)) {
      throw Error(ErrorKind::Validation, where + ": relative humidity " + row[3] + " outside [0, 100]");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<WeeklyRainfall> read_rain(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  csv::require_header(table, kRainHeader);
  std::vector<WeeklyRainfall> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = table.where(i);
    WeeklyRainfall w;
    w.district = require_district(row[0], where);
    w.iso_year = static_cast<int>(csv::parse_int(row[1], where));
    w.iso_week = static_cast<int>(csv::parse_int(row[2], where));
    w.rainfall = csv::parse_double(row[3], where);
    at_row(where, [&] { return iso_week_thursday(w.iso_year, w.iso_week); });
    if (w.rainfall < 0.0) throw Error(ErrorKind::Validation, where + ": negative rainfall");
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<LarvalSurvey> read_larval(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  csv::require_header(table, kLarvalHeader);
  std::vector<LarvalSurvey> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = table.where(i);
    const int empties = static_cast<int>(row[3].empty()) + static_cast<int>(row[4].empty()) +
                        static_cast<int>(row[5].empty());
    if (empties == 3) continue;
    if (empties != 0) throw Error(ErrorKind::Validation, where + ": larval counts must be all present or all empty");
    LarvalSurvey s;
    s.district = require_district(row[0], where);
    s.month = parse_month(row[1], row[2], where);
    s.n_low = csv::parse_int(row[3], where);
    s.n_mid = csv::parse_int(row[4], where);
    s.n_high = csv::parse_int(row[5], where);
    if (s.n_low < 0 || s.n_mid < 0 || s.n_high < 0) throw Error(ErrorKind::Validation, where + ": negative house count");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CaseCount> read_cases(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  csv::require_header(table, kCasesHeader);
  std::vector<CaseCount> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = table.where(i);
    CaseCount c;
    c.district = require_district(row[0], where);
    c.month = parse_month(row[1], row[2], where);
    c.cases = csv::parse_int(row[3], where);
    if (c.cases < 0) throw Error(ErrorKind::Validation, where + ": negative case count");
    out.push_back(std::move(c));
  }
  return out;
}

std::string climate_csv(const std::vector<RawClimateReading>& rows) {
  std::string out = csv::join(kClimateHeader) + "\n";
  for (const auto& r : rows) {
    out += r.district + "," + format_date(r.date) + "," + csv::format_double(r.temperature) + "," +
           csv::format_double(r.relative_humidity) + "\n";
  }
  return out;
}

std::string rain_csv(const std::vector<WeeklyRainfall>& rows) {
  std::string out = csv::join(kRainHeader) + "\n";
  for (const auto& w : rows) {
    out += w.district + "," + std::to_string(w.iso_year) + "," + std::to_string(w.iso_week) + "," +
           csv::format_double(w.rainfall) + "\n";
  }
  return out;
}

std::string cases_csv(const std::vector<CaseCount>& rows) {
  std::string out = csv::join(kCasesHeader) + "\n";
  for (const auto& c : rows) {
    out += c.district + "," + std::to_string(c.month.year) + "," + std::to_string(c.month.month) + "," +
           std::to_string(c.cases) + "\n";
  }
  return out;
}

std::string larval_csv(const std::vector<LarvalRow>& rows) {
  std::string out = csv::join(kLarvalHeader) + "\n";
  for (const auto& row : rows) {
    const auto& s = row.survey;
    out += s.district + "," + std::to_string(s.month.year) + "," + std::to_string(s.month.month) + ",";
    if (row.missing) {
      out += ",,\n";
    } else {
      out += std::to_string(s.n_low) + "," + std::to_string(s.n_mid) + "," + std::to_string(s.n_high) + "\n";
    }
  }
  return out;
}

std::string records_csv(const std::vector<DistrictMonthRecord>& records, const std::vector<LarvalSource>& sources) {
  if (!sources.empty() && sources.size() != records.size()) {
    throw Error(ErrorKind::Shape, "one larval source per record required");
  }
  auto header = kRecordsHeader;
  if (!sources.empty()) header.push_back("larval_source");
  std::string out = csv::join(header) + "\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out += r.district + "," + std::to_string(r.month.year) + "," + std::to_string(r.month.month) + "," +
           csv::format_double(r.temp_mean) + "," + csv::format_double(r.rh_mean) + "," +
           csv::format_double(r.rain_total) + "," + (r.larval_index ? csv::format_double(*r.larval_index) : "") + "," +
           csv::format_double(r.cases);
    if (!sources.empty()) out += sources[i] == LarvalSource::Observed ? ",observed" : ",imputed";
    out += "\n";
  }
  return out;
}

RecordFile read_records(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  auto with_source = kRecordsHeader;
  with_source.push_back("larval_source");
  const bool has_source = table.header == with_source;
  if (!has_source) csv::require_header(table, kRecordsHeader);

  RecordFile out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = table.where(i);
    DistrictMonthRecord r;
    r.district = require_district(row[0], where);
    r.month = parse_month(row[1], row[2], where);
    r.temp_mean = csv::parse_double(row[3], where);
    r.rh_mean = csv::parse_double(row[4], where);
    r.rain_total = csv::parse_double(row[5], where);
    if (!row[6].empty()) r.larval_index = csv::parse_double(row[6], where);
    r.cases = csv::parse_double(row[7], where);
    if (has_source) {
      if (row[8] == "observed") {
        out.sources.push_back(LarvalSource::Observed);
      } else if (row[8] == "imputed") {
        out.sources.push_back(LarvalSource::Imputed);
      } else {
        throw Error(ErrorKind::Validation, where + ": larval_source must be observed or imputed");
      }
    }
    if (!out.records.empty()) {
      const auto& prev = out.records.back();
      if (std::tie(prev.district, prev.month) >= std::tie(r.district, r.month)) {
        throw Error(ErrorKind::Validation, where + ": records must be sorted by district then month without duplicates");
      }
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace dengue::io
