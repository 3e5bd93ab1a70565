#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "dengue/csv.hpp"
#include "dengue/error.hpp"
#include "dengue/experiments.hpp"

namespace dengue {

namespace {

constexpr const char* kMonthNames[12] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                         "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

std::string first_column(SweepKind kind) {
  switch (kind) {
    case SweepKind::Variant: return "Variant";
    case SweepKind::Timestep: return "Time step";
    case SweepKind::Predictor: return "Predictor";
    case SweepKind::Architecture: return "Model";
  }
  return "Config";
}

std::string fmt(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

long long column_sum(const std::vector<std::vector<std::optional<double>>>& cells, std::size_t d) {
  long long sum = 0;
  for (const auto& month : cells)
    if (month[d]) sum += round_count(*month[d]);
  return sum;
}

csv::Table parse_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return csv::parse(in, source);
}

}  // namespace

long long round_count(double value) { return std::llround(value); }

long long DistrictTable::predicted_count(std::size_t district) const { return column_sum(predicted, district); }
long long DistrictTable::actual_count(std::size_t district) const { return column_sum(actual, district); }

DistrictTable build_district_table(std::span<const PredictionRow> predictions, std::optional<int> year,
                                   std::size_t max_districts) {
  if (predictions.empty()) throw Error(ErrorKind::EmptyInput, "no predictions to tabulate");
  DistrictTable table;
  if (year) {
    table.year = *year;
  } else {
    std::map<int, std::set<int>> months;
    for (const auto& p : predictions) months[p.month.year].insert(p.month.month);
    std::size_t most = 0;
    for (const auto& [y, ms] : months) {
      if (ms.size() >= most) {
        most = ms.size();
        table.year = y;
      }
    }
  }
  std::set<std::string> names;
  for (const auto& p : predictions)
    if (p.month.year == table.year) names.insert(p.district);
  for (const auto& n : names) {
    if (table.districts.size() == max_districts) break;
    table.districts.push_back(n);
  }
  const std::size_t nd = table.districts.size();
  table.predicted.assign(12, std::vector<std::optional<double>>(nd));
  table.actual.assign(12, std::vector<std::optional<double>>(nd));
  for (const auto& p : predictions) {
    if (p.month.year != table.year) continue;
    const auto it = std::find(table.districts.begin(), table.districts.end(), p.district);
    if (it == table.districts.end()) continue;
    const auto d = static_cast<std::size_t>(it - table.districts.begin());
    table.predicted[p.month.month - 1][d] = p.predicted;
    table.actual[p.month.month - 1][d] = p.actual;
  }
  return table;
}

std::string district_table_markdown(const DistrictTable& table, const std::string& title) {
  std::string out;
  if (!title.empty()) out += "### " + title + "\n\n";
  out += "| Month |";
  for (const auto& d : table.districts) out += " " + d + " |";
  out += "\n|---|";
  for (std::size_t d = 0; d < table.districts.size(); ++d) out += "---:|";
  out += "\n";
  for (int m = 0; m < 12; ++m) {
    out += std::string("| ") + kMonthNames[m] + " |";
    for (const auto& cell : table.predicted[m]) out += " " + (cell ? std::to_string(round_count(*cell)) : "-") + " |";
    out += "\n";
  }
  out += "| Predicted Count |";
  for (std::size_t d = 0; d < table.districts.size(); ++d) out += " " + std::to_string(table.predicted_count(d)) + " |";
  out += "\n| Actual Count |";
  for (std::size_t d = 0; d < table.districts.size(); ++d) out += " " + std::to_string(table.actual_count(d)) + " |";
  out += "\n";
  return out;
}

std::string district_table_csv(const DistrictTable& table) {
  std::string out = "year,month,district,predicted,actual\n";
  for (int m = 0; m < 12; ++m) {
    for (std::size_t d = 0; d < table.districts.size(); ++d) {
      if (!table.predicted[m][d]) continue;
      out += std::to_string(table.year) + "," + std::to_string(m + 1) + "," + table.districts[d] + "," +
             csv::format_double(*table.predicted[m][d]) + "," + csv::format_double(*table.actual[m][d]) + "\n";
    }
  }
  return out;
}

std::string mse_table_markdown(SweepKind kind, std::span<const SweepRow> rows, const std::string& title) {
  std::string out;
  if (!title.empty()) out += "### " + title + "\n\n";
  out += "| " + first_column(kind) +
         " | Validation data | Test data | Validation (scaled) | Test (scaled) | Runs | Best |\n";
  out += "|---|---:|---:|---:|---:|---:|:---:|\n";
  for (const auto& r : rows) {
    std::string runs = std::to_string(r.runs_ok);
    if (r.runs_failed > 0) runs += " (" + std::to_string(r.runs_failed) + " failed)";
    out += "| " + r.label + " | " + fmt(r.validation_mse) + " | " + fmt(r.test_mse) + " | " +
           fmt(r.validation_mse_scaled) + " | " + fmt(r.test_mse_scaled) + " | " + runs + " | " +
           (r.best ? "*" : "") + " |\n";
  }
  return out;
}

std::string summary_csv(SweepKind kind, std::span<const SweepRow> rows) {
  std::string out =
      "kind,label,validation_mse,test_mse,validation_mse_scaled,test_mse_scaled,runs_ok,runs_failed,best\n";
  for (const auto& r : rows) {
    out += sweep_kind_name(kind) + "," + csv_safe(r.label) + "," + csv::format_double(r.validation_mse) + "," +
           csv::format_double(r.test_mse) + "," + csv::format_double(r.validation_mse_scaled) + "," +
           csv::format_double(r.test_mse_scaled) + "," + std::to_string(r.runs_ok) + "," +
           std::to_string(r.runs_failed) + "," + (r.best ? "1" : "0") + "\n";
  }
  return out;
}

SummaryFile parse_summary_csv(const std::string& text) {
  const auto table = parse_text(text, "summary.csv");
  csv::require_header(table, {"kind", "label", "validation_mse", "test_mse", "validation_mse_scaled",
                              "test_mse_scaled", "runs_ok", "runs_failed", "best"});
  if (table.rows.empty()) throw Error(ErrorKind::EmptyInput, "summary.csv has no rows");
  SummaryFile out;
  out.kind = parse_sweep_kind(table.rows.front()[0]);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = table.where(i);
    SweepRow r;
    r.label = row[1];
    r.validation_mse = csv::parse_double(row[2], where);
    r.test_mse = csv::parse_double(row[3], where);
    r.validation_mse_scaled = csv::parse_double(row[4], where);
    r.test_mse_scaled = csv::parse_double(row[5], where);
    r.runs_ok = static_cast<std::size_t>(csv::parse_int(row[6], where));
    r.runs_failed = static_cast<std::size_t>(csv::parse_int(row[7], where));
    r.best = row[8] == "1";
    out.rows.push_back(r);
  }
  return out;
}

std::string runs_csv(std::span<const RunReport> reports) {
  std::string out =
      "label,seed,validation_mse,test_mse,validation_mse_scaled,test_mse_scaled,test_target_variance,best_epoch,"
      "error\n";
  for (const auto& r : reports) {
    out += csv_safe(r.label) + "," + std::to_string(r.seed) + "," + csv::format_double(r.validation_mse) + "," +
           csv::format_double(r.test_mse) + "," + csv::format_double(r.validation_mse_scaled) + "," +
           csv::format_double(r.test_mse_scaled) + "," + csv::format_double(r.test_target_variance) + "," +
           std::to_string(r.best_epoch) + "," + csv_safe(r.error) + "\n";
  }
  return out;
}

std::vector<RunReport> parse_runs_csv(const std::string& text) {
  const auto table = parse_text(text, "runs.csv");
  csv::require_header(table, {"label", "seed", "validation_mse", "test_mse", "validation_mse_scaled",
                              "test_mse_scaled", "test_target_variance", "best_epoch", "error"});
  std::vector<RunReport> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = table.where(i);
    RunReport r;
    r.label = row[0];
    r.seed = csv::parse_uint(row[1], where);
    r.validation_mse = csv::parse_double(row[2], where);
    r.test_mse = csv::parse_double(row[3], where);
    r.validation_mse_scaled = csv::parse_double(row[4], where);
    r.test_mse_scaled = csv::parse_double(row[5], where);
    r.test_target_variance = csv::parse_double(row[6], where);
    r.best_epoch = static_cast<std::size_t>(csv::parse_int(row[7], where));
    r.error = row[8];
    out.push_back(std::move(r));
  }
  return out;
}

std::string predictions_csv(std::span<const PredictionRow> rows) {
  std::string out = "district,year,month,actual,predicted\n";
  for (const auto& p : rows) {
    out += p.district + "," + std::to_string(p.month.year) + "," + std::to_string(p.month.month) + "," +
           csv::format_double(p.actual) + "," + csv::format_double(p.predicted) + "\n";
  }
  return out;
}

std::vector<PredictionRow> parse_predictions_csv(const std::string& text) {
  const auto table = parse_text(text, "predictions");
  csv::require_header(table, {"district", "year", "month", "actual", "predicted"});
  std::vector<PredictionRow> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = table.where(i);
    YearMonth ym{static_cast<int>(csv::parse_int(row[1], where)), static_cast<int>(csv::parse_int(row[2], where))};
    if (!ym.valid()) throw Error(ErrorKind::Validation, where + ": invalid month");
    out.push_back({row[0], ym, csv::parse_double(row[3], where), csv::parse_double(row[4], where)});
  }
  return out;
}

std::string slug(const std::string& label) {
  std::string out;
  for (unsigned char c : label) {
    if (std::isalnum(c)) {
      out += static_cast<char>(std::tolower(c));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "run" : out;
}

std::vector<RenderedTable> render_report(std::span<const RunReport> reports, SweepKind kind) {
  if (reports.empty()) throw Error(ErrorKind::EmptyInput, "no run reports to render");
  std::vector<RenderedTable> out;
  const auto rows = summarize(reports);
  out.push_back({"mse_" + sweep_kind_name(kind),
                 mse_table_markdown(kind, rows, "Mean square error by " + first_column(kind)),
                 summary_csv(kind, rows)});
  for (const auto& row : rows) {
    const auto it = std::find_if(reports.begin(), reports.end(), [&](const RunReport& r) {
      return r.label == row.label && r.ok() && !r.predictions.empty();
    });
    if (it == reports.end()) continue;
    const auto table = build_district_table(it->predictions);
    const std::string title =
        row.label + ": predicted incidence by district, " + std::to_string(table.year) + " (seed " +
        std::to_string(it->seed) + ")";
    out.push_back({"districts_" + slug(row.label), district_table_markdown(table, title), district_table_csv(table)});
  }
  return out;
}

}  // namespace dengue
