#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dengue/dataprep.hpp"

namespace dengue::io {

// Input files. Every row is validated on load; errors carry file:line.
std::vector<RawClimateReading> read_climate(const std::filesystem::path& path);
std::vector<WeeklyRainfall> read_rain(const std::filesystem::path& path);
/// Rows whose three count cells are all empty mean "no survey" and are dropped.
std::vector<LarvalSurvey> read_larval(const std::filesystem::path& path);
std::vector<CaseCount> read_cases(const std::filesystem::path& path);

std::string climate_csv(const std::vector<RawClimateReading>& rows);
std::string rain_csv(const std::vector<WeeklyRainfall>& rows);
std::string cases_csv(const std::vector<CaseCount>& rows);

struct LarvalRow {
  LarvalSurvey survey;
  /// Written with empty count cells.
  bool missing = false;
};
std::string larval_csv(const std::vector<LarvalRow>& rows);

enum class LarvalSource { Observed, Imputed };

/// records.csv, or imputed.csv when `sources` is non-empty (adds a
/// larval_source column).
std::string records_csv(const std::vector<DistrictMonthRecord>& records,
                        const std::vector<LarvalSource>& sources = {});

struct RecordFile {
  std::vector<DistrictMonthRecord> records;
  /// Empty for records.csv.
  std::vector<LarvalSource> sources;
};

RecordFile read_records(const std::filesystem::path& path);

}  // namespace dengue::io
