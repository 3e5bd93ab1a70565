#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dengue/calendar.hpp"
#include "dengue/matrix.hpp"

namespace dengue {

using DistrictMonth = std::pair<std::string, YearMonth>;

struct RawClimateReading {
  std::string district;
  Date date;
  double temperature = 0.0;        // degrees Celsius
  double relative_humidity = 0.0;  // percent
};

struct WeeklyRainfall {
  std::string district;
  int iso_year = 0;
  int iso_week = 1;
  double rainfall = 0.0;  // mm
};

/// House counts per larval band (0-5%, 5-10%, >10%) for one district-month.
struct LarvalSurvey {
  std::string district;
  YearMonth month;
  std::int64_t n_low = 0;
  std::int64_t n_mid = 0;
  std::int64_t n_high = 0;
};

struct CaseCount {
  std::string district;
  YearMonth month;
  std::int64_t cases = 0;
};

struct ClimateMonthly {
  double temp_mean = 0.0;
  double rh_mean = 0.0;
  std::size_t readings = 0;
};

/// One district-month of predictors and target. `cases` holds a count on
/// ingest but is a double so the same record type carries scaled values.
struct DistrictMonthRecord {
  std::string district;
  YearMonth month;
  double temp_mean = 0.0;
  double rh_mean = 0.0;
  double rain_total = 0.0;
  std::optional<double> larval_index;
  double cases = 0.0;

  bool operator==(const DistrictMonthRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Aggregation

/// Mean temperature and humidity per district-month.
std::map<DistrictMonth, ClimateMonthly> aggregate_monthly(std::span<const RawClimateReading> readings);

/// Weekly rainfall summed into months; each ISO week belongs to the month
/// holding its Thursday.
std::map<DistrictMonth, double> rain_to_monthly(std::span<const WeeklyRainfall> weekly);

/// (low*1 + mid*2 + high*3) / (low + mid + high), in [1, 3]. Absent when no
/// house was inspected.
std::optional<double> weighted_larval_index(std::int64_t n_low, std::int64_t n_mid, std::int64_t n_high);

/// Inner join of climate, rain and cases on (district, month), with the larval
/// index attached where a survey exists. Sorted by district, then month.
std::vector<DistrictMonthRecord> assemble_records(const std::map<DistrictMonth, ClimateMonthly>& climate,
                                                  const std::map<DistrictMonth, double>& rain,
                                                  std::span<const LarvalSurvey> larval,
                                                  std::span<const CaseCount> cases);

// ---------------------------------------------------------------------------
// Scaling

enum class Feature { Temperature, Humidity, Rainfall, Larval, Cases };

std::string feature_name(Feature f);
Feature parse_feature(const std::string& name);
double feature_value(const DistrictMonthRecord& r, Feature f);  // Larval must be present
void set_feature(DistrictMonthRecord& r, Feature f, double value);

struct FeatureRange {
  Feature feature;
  double min = 0.0;
  double max = 0.0;
  bool operator==(const FeatureRange&) const = default;
};

/// Per-feature min-max scaling to [0, 1]. Constant features map to 0.
class Scaler {
 public:
  Scaler() = default;
  explicit Scaler(std::vector<FeatureRange> ranges) : ranges_(std::move(ranges)) {}

  bool fitted() const noexcept { return !ranges_.empty(); }
  bool has(Feature f) const;
  const FeatureRange& range(Feature f) const;
  const std::vector<FeatureRange>& ranges() const noexcept { return ranges_; }

  double scale(Feature f, double value) const;
  double unscale(Feature f, double scaled) const;

  bool operator==(const Scaler&) const = default;

 private:
  std::vector<FeatureRange> ranges_;
};

/// Fits on whatever records are passed; callers restrict them to the training
/// period. Absent larval values are ignored.
Scaler fit_scaler(std::span<const DistrictMonthRecord> records, std::span<const Feature> features);
std::vector<DistrictMonthRecord> apply_scaler(const Scaler& scaler, std::span<const DistrictMonthRecord> records);
std::vector<DistrictMonthRecord> invert_scaler(const Scaler& scaler, std::span<const DistrictMonthRecord> records);

// ---------------------------------------------------------------------------
// Windowing

enum class Variant { I, II };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

std::vector<Feature> all_climate_features();

/// Column layout of a window row: the chosen climate predictors, then the
/// larval index (variant II), then the incidence slot.
struct WindowSchema {
  std::vector<Feature> climate = all_climate_features();
  bool larval = true;

  std::size_t width() const noexcept { return climate.size() + (larval ? 1 : 0) + 1; }
  std::size_t cases_column() const noexcept { return width() - 1; }
  std::vector<Feature> columns() const;
  Variant variant() const noexcept { return larval ? Variant::II : Variant::I; }

  bool operator==(const WindowSchema&) const = default;
};

WindowSchema make_schema(Variant variant, std::vector<Feature> climate = all_climate_features());

/// t x F predictor matrix and the incidence of the window's last month.
struct SupervisedWindow {
  Matrix features;
  double target = 0.0;
  std::string district;
  YearMonth target_month;
};

struct GapReport {
  std::size_t skipped_windows = 0;
  /// Last month present before each break in a district's month sequence.
  std::vector<DistrictMonth> gaps;

  bool empty() const noexcept { return gaps.empty(); }
};

struct WindowSet {
  std::vector<SupervisedWindow> windows;
  GapReport gaps;
};

/// Windows over one district's chronologically sorted series. The current
/// month's incidence slot is fixed at 0; past rows carry observed incidence.
WindowSet build_windows(std::span<const DistrictMonthRecord> district_series, std::size_t timesteps,
                        const WindowSchema& schema);
WindowSet build_windows(std::span<const DistrictMonthRecord> district_series, std::size_t timesteps, Variant variant);

/// Groups records by district (input sorted by district then month) and
/// windows each series. Variant II with absent larval values raises
/// PrecisionError naming every affected district.
WindowSet build_all_windows(std::span<const DistrictMonthRecord> records, std::size_t timesteps,
                            const WindowSchema& schema);

// ---------------------------------------------------------------------------
// Splitting

struct SplitDataset {
  std::vector<SupervisedWindow> train;
  std::vector<SupervisedWindow> test;
  std::uint64_t split_seed = 0;
};

/// Number of training windows for n windows at `ratio`: floor(ratio * n).
std::size_t train_count(std::size_t n, double ratio);

/// Chronological split: windows ordered by (target_month, district), the
/// first floor(ratio * n) go to train. The seed is recorded only.
SplitDataset split_dataset(std::vector<SupervisedWindow> windows, double ratio, std::uint64_t seed);

/// Windows, split and scaled ready for training. The scaler is fitted on the
/// records up to the last training target month.
struct PreparedData {
  SplitDataset split;
  Scaler scaler;
  WindowSchema schema;
  std::size_t timesteps = 3;
  GapReport gaps;
};

PreparedData prepare_supervised(std::span<const DistrictMonthRecord> records, std::size_t timesteps,
                                const WindowSchema& schema, double ratio, std::uint64_t seed);

}  // namespace dengue
