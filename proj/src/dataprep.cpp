#include "dengue/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dengue/error.hpp"

namespace dengue {

namespace {

std::string key_string(const DistrictMonth& key) { return "(" + key.first + ", " + key.second.to_string() + ")"; }

}  // namespace

// ---------------------------------------------------------------------------
// Aggregation

std::map<DistrictMonth, ClimateMonthly> aggregate_monthly(std::span<const RawClimateReading> readings) {
  if (readings.empty()) throw Error(ErrorKind::EmptyInput, "no climate readings");

  struct Sums {
    double temp = 0.0;
    double rh = 0.0;
    std::size_t n = 0;
  };
  std::map<DistrictMonth, Sums> sums;
  std::set<std::pair<std::string, int>> seen_days;

  for (std::size_t i = 0; i < readings.size(); ++i) {
    const auto& r = readings[i];
    const std::string row = "climate reading #" + std::to_string(i) + " (" + r.district + ", " +
                            (r.date.ok() ? format_date(r.date) : std::string("invalid date")) + ")";
    if (!r.date.ok()) throw Error(ErrorKind::Validation, row + ": invalid date");
    if (!std::isfinite(r.temperature)) throw Error(ErrorKind::Validation, row + ": non-finite temperature");
    if (!(r.relative_humidity >= 0.0 && r.relative_humidity <= 100.0)) {
      throw Error(ErrorKind::Validation, row + ": relative humidity " + std::to_string(r.relative_humidity) +
                                             " outside [0, 100]");
    }
    const int day_number = std::chrono::sys_days{r.date}.time_since_epoch().count();
    if (!seen_days.emplace(r.district, day_number).second) {
      throw Error(ErrorKind::DuplicateKey, row + ": second reading for the same district and date");
    }
    auto& s = sums[{r.district, month_of(r.date)}];
    s.temp += r.temperature;
    s.rh += r.relative_humidity;
    ++s.n;
  }

  std::map<DistrictMonth, ClimateMonthly> out;
  for (const auto& [key, s] : sums) {
    const double n = static_cast<double>(s.n);
    out.emplace(key, ClimateMonthly{s.temp / n, s.rh / n, s.n});
  }
  return out;
}

std::map<DistrictMonth, double> rain_to_monthly(std::span<const WeeklyRainfall> weekly) {
  std::map<DistrictMonth, double> out;
  std::set<std::tuple<std::string, int, int>> seen;
  for (std::size_t i = 0; i < weekly.size(); ++i) {
    const auto& w = weekly[i];
    const std::string row = "rainfall row #" + std::to_string(i) + " (" + w.district + ", " +
                            std::to_string(w.iso_year) + "-W" + std::to_string(w.iso_week) + ")";
    if (!(std::isfinite(w.rainfall) && w.rainfall >= 0.0)) {
      throw Error(ErrorKind::Validation, row + ": rainfall must be finite and non-negative");
    }
    Date thursday;
    try {
      thursday = iso_week_thursday(w.iso_year, w.iso_week);
    } catch (const Error& e) {
      throw Error(ErrorKind::Validation, row + ": " + e.what());
    }
    if (!seen.emplace(w.district, w.iso_year, w.iso_week).second) {
      throw Error(ErrorKind::DuplicateKey, row + ": week listed twice");
    }
    out[{w.district, month_of(thursday)}] += w.rainfall;
  }
  return out;
}

std::optional<double> weighted_larval_index(std::int64_t n_low, std::int64_t n_mid, std::int64_t n_high) {
  if (n_low < 0 || n_mid < 0 || n_high < 0) {
    throw Error(ErrorKind::Validation, "negative larval house count (" + std::to_string(n_low) + ", " +
                                           std::to_string(n_mid) + ", " + std::to_string(n_high) + ")");
  }
  const std::int64_t houses = n_low + n_mid + n_high;
  if (houses == 0) return std::nullopt;
  const double weighted = static_cast<double>(n_low) + 2.0 * static_cast<double>(n_mid) + 3.0 * static_cast<double>(n_high);
  return weighted / static_cast<double>(houses);
}

std::vector<DistrictMonthRecord> assemble_records(const std::map<DistrictMonth, ClimateMonthly>& climate,
                                                  const std::map<DistrictMonth, double>& rain,
                                                  std::span<const LarvalSurvey> larval,
                                                  std::span<const CaseCount> cases) {
  std::map<DistrictMonth, std::optional<double>> larval_by_key;
  for (const auto& s : larval) {
    DistrictMonth key{s.district, s.month};
    if (!s.month.valid()) throw Error(ErrorKind::Validation, "larval survey " + key_string(key) + ": invalid month");
    auto index = weighted_larval_index(s.n_low, s.n_mid, s.n_high);
    if (!larval_by_key.emplace(key, index).second) {
      throw Error(ErrorKind::DuplicateKey, "larval survey " + key_string(key) + " listed twice");
    }
  }

  std::map<DistrictMonth, std::int64_t> cases_by_key;
  for (const auto& c : cases) {
    DistrictMonth key{c.district, c.month};
    if (!c.month.valid()) throw Error(ErrorKind::Validation, "case count " + key_string(key) + ": invalid month");
    if (c.cases < 0) throw Error(ErrorKind::Validation, "case count " + key_string(key) + " is negative");
    if (!cases_by_key.emplace(key, c.cases).second) {
      throw Error(ErrorKind::DuplicateKey, "case count " + key_string(key) + " listed twice");
    }
  }

  std::vector<DistrictMonthRecord> out;
  for (const auto& [key, count] : cases_by_key) {
    const auto cl = climate.find(key);
    const auto rn = rain.find(key);
    if (cl == climate.end() || rn == rain.end()) continue;
    DistrictMonthRecord r;
    r.district = key.first;
    r.month = key.second;
    r.temp_mean = cl->second.temp_mean;
    r.rh_mean = cl->second.rh_mean;
    r.rain_total = rn->second;
    if (auto lv = larval_by_key.find(key); lv != larval_by_key.end()) r.larval_index = lv->second;
    r.cases = static_cast<double>(count);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scaling

std::string feature_name(Feature f) {
  switch (f) {
    case Feature::Temperature: return "temperature";
    case Feature::Humidity: return "humidity";
    case Feature::Rainfall: return "rainfall";
    case Feature::Larval: return "larval_index";
    case Feature::Cases: return "cases";
  }
  return "?";
}

Feature parse_feature(const std::string& name) {
  for (Feature f : {Feature::Temperature, Feature::Humidity, Feature::Rainfall, Feature::Larval, Feature::Cases})
    if (feature_name(f) == name) return f;
  throw Error(ErrorKind::Validation, "unknown feature '" + name + "'");
}

double feature_value(const DistrictMonthRecord& r, Feature f) {
  switch (f) {
    case Feature::Temperature: return r.temp_mean;
    case Feature::Humidity: return r.rh_mean;
    case Feature::Rainfall: return r.rain_total;
    case Feature::Larval:
      if (!r.larval_index) {
        throw Error(ErrorKind::Precision, "larval index missing for (" + r.district + ", " + r.month.to_string() + ")");
      }
      return *r.larval_index;
    case Feature::Cases: return r.cases;
  }
  return 0.0;
}

void set_feature(DistrictMonthRecord& r, Feature f, double value) {
  switch (f) {
    case Feature::Temperature: r.temp_mean = value; break;
    case Feature::Humidity: r.rh_mean = value; break;
    case Feature::Rainfall: r.rain_total = value; break;
    case Feature::Larval: r.larval_index = value; break;
    case Feature::Cases: r.cases = value; break;
  }
}

bool Scaler::has(Feature f) const {
  return std::any_of(ranges_.begin(), ranges_.end(), [f](const FeatureRange& r) { return r.feature == f; });
}

const FeatureRange& Scaler::range(Feature f) const {
  if (!fitted()) throw Error(ErrorKind::NotFitted, "scaler has not been fitted");
  for (const auto& r : ranges_)
    if (r.feature == f) return r;
  throw Error(ErrorKind::NotFitted, "scaler was not fitted on feature '" + feature_name(f) + "'");
}

double Scaler::scale(Feature f, double value) const {
  const auto& r = range(f);
  if (!(r.max > r.min)) return 0.0;
  return (value - r.min) / (r.max - r.min);
}

double Scaler::unscale(Feature f, double scaled) const {
  const auto& r = range(f);
  if (!(r.max > r.min)) return r.min;
  return r.min + scaled * (r.max - r.min);
}

Scaler fit_scaler(std::span<const DistrictMonthRecord> records, std::span<const Feature> features) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "cannot fit a scaler on zero records");
  std::vector<FeatureRange> ranges;
  for (Feature f : features) {
    bool any = false;
    FeatureRange fr{f, 0.0, 0.0};
    for (const auto& r : records) {
      if (f == Feature::Larval && !r.larval_index) continue;
      const double v = feature_value(r, f);
      if (!any) {
        fr.min = fr.max = v;
        any = true;
      } else {
        fr.min = std::min(fr.min, v);
        fr.max = std::max(fr.max, v);
      }
    }
    if (!any) throw Error(ErrorKind::EmptyInput, "no observed values for feature '" + feature_name(f) + "'");
    ranges.push_back(fr);
  }
  return Scaler(std::move(ranges));
}

namespace {

template <typename Fn>
std::vector<DistrictMonthRecord> transform_records(const Scaler& scaler, std::span<const DistrictMonthRecord> records,
                                                   Fn fn) {
  if (!scaler.fitted()) throw Error(ErrorKind::NotFitted, "scaler has not been fitted");
  std::vector<DistrictMonthRecord> out(records.begin(), records.end());
  for (auto& r : out) {
    for (const auto& fr : scaler.ranges()) {
      if (fr.feature == Feature::Larval && !r.larval_index) continue;
      set_feature(r, fr.feature, fn(fr.feature, feature_value(r, fr.feature)));
    }
  }
  return out;
}

}  // namespace

std::vector<DistrictMonthRecord> apply_scaler(const Scaler& scaler, std::span<const DistrictMonthRecord> records) {
  return transform_records(scaler, records, [&](Feature f, double v) { return scaler.scale(f, v); });
}

std::vector<DistrictMonthRecord> invert_scaler(const Scaler& scaler, std::span<const DistrictMonthRecord> records) {
  return transform_records(scaler, records, [&](Feature f, double v) { return scaler.unscale(f, v); });
}

// ---------------------------------------------------------------------------
// Windowing

std::string variant_name(Variant v) { return v == Variant::I ? "I" : "II"; }

Variant parse_variant(const std::string& name) {
  if (name == "I" || name == "1") return Variant::I;
  if (name == "II" || name == "2") return Variant::II;
  throw Error(ErrorKind::Validation, "unknown variant '" + name + "' (expected I or II)");
}

std::vector<Feature> all_climate_features() { return {Feature::Temperature, Feature::Humidity, Feature::Rainfall}; }

std::vector<Feature> WindowSchema::columns() const {
  std::vector<Feature> cols = climate;
  if (larval) cols.push_back(Feature::Larval);
  cols.push_back(Feature::Cases);
  return cols;
}

WindowSchema make_schema(Variant variant, std::vector<Feature> climate) {
  for (Feature f : climate) {
    if (f == Feature::Larval || f == Feature::Cases) {
      throw Error(ErrorKind::Validation, "'" + feature_name(f) + "' is not a climate predictor");
    }
  }
  if (climate.empty()) throw Error(ErrorKind::Validation, "at least one climate predictor is required");
  return WindowSchema{std::move(climate), variant == Variant::II};
}

WindowSet build_windows(std::span<const DistrictMonthRecord> series, std::size_t timesteps, const WindowSchema& schema) {
  if (timesteps < 2) throw Error(ErrorKind::Validation, "timesteps must be at least 2, got " + std::to_string(timesteps));
  WindowSet out;
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i].district != series[0].district) {
      throw Error(ErrorKind::Validation, "build_windows expects one district, saw '" + series[0].district + "' and '" +
                                             series[i].district + "'");
    }
    if (!(series[i - 1].month < series[i].month)) {
      throw Error(ErrorKind::Validation, "months for '" + series[i].district + "' are not strictly increasing at " +
                                             series[i].month.to_string());
    }
    if (series[i].month.ordinal() != series[i - 1].month.ordinal() + 1) {
      out.gaps.gaps.emplace_back(series[i - 1].district, series[i - 1].month);
    }
  }
  if (series.size() < timesteps) return out;

  const auto cols = schema.columns();
  const std::size_t cases_col = schema.cases_column();
  for (std::size_t end = timesteps - 1; end < series.size(); ++end) {
    const std::size_t start = end + 1 - timesteps;
    if (series[end].month.ordinal() - series[start].month.ordinal() != static_cast<int>(timesteps) - 1) {
      ++out.gaps.skipped_windows;
      continue;
    }
    SupervisedWindow w;
    w.features = Matrix(timesteps, cols.size());
    for (std::size_t row = 0; row < timesteps; ++row) {
      const auto& rec = series[start + row];
      for (std::size_t c = 0; c < cases_col; ++c) w.features(row, c) = feature_value(rec, cols[c]);
      w.features(row, cases_col) = row + 1 == timesteps ? 0.0 : rec.cases;
    }
    w.target = series[end].cases;
    w.district = series[end].district;
    w.target_month = series[end].month;
    out.windows.push_back(std::move(w));
  }
  return out;
}

WindowSet build_windows(std::span<const DistrictMonthRecord> series, std::size_t timesteps, Variant variant) {
  return build_windows(series, timesteps, make_schema(variant));
}

WindowSet build_all_windows(std::span<const DistrictMonthRecord> records, std::size_t timesteps,
                            const WindowSchema& schema) {
  if (schema.larval) {
    std::vector<std::string> missing;
    for (const auto& r : records) {
      if (!r.larval_index && (missing.empty() || missing.back() != r.district)) missing.push_back(r.district);
    }
    if (!missing.empty()) {
      std::string names;
      for (const auto& d : missing) names += (names.empty() ? "" : ", ") + d;
      throw Error(ErrorKind::Precision, "variant II needs a larval index for every month; missing in: " + names);
    }
  }

  WindowSet out;
  std::size_t begin = 0;
  while (begin < records.size()) {
    std::size_t end = begin;
    while (end < records.size() && records[end].district == records[begin].district) ++end;
    auto part = build_windows(records.subspan(begin, end - begin), timesteps, schema);
    for (auto& w : part.windows) out.windows.push_back(std::move(w));
    out.gaps.skipped_windows += part.gaps.skipped_windows;
    out.gaps.gaps.insert(out.gaps.gaps.end(), part.gaps.gaps.begin(), part.gaps.gaps.end());
    begin = end;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

std::size_t train_count(std::size_t n, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::Validation, "split ratio must lie in (0, 1)");
  // The small slack keeps products such as 0.85 * 20 from landing just below
  // an integer.
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

SplitDataset split_dataset(std::vector<SupervisedWindow> windows, double ratio, std::uint64_t seed) {
  const std::size_t n_train = train_count(windows.size(), ratio);
  if (windows.empty()) throw Error(ErrorKind::EmptyInput, "no windows to split");
  if (n_train == 0) {
    throw Error(ErrorKind::EmptyTrain, std::to_string(windows.size()) + " window(s) at ratio " + std::to_string(ratio) +
                                           " leave the training split empty");
  }
  std::stable_sort(windows.begin(), windows.end(), [](const SupervisedWindow& a, const SupervisedWindow& b) {
    if (a.target_month != b.target_month) return a.target_month < b.target_month;
    return a.district < b.district;
  });
  SplitDataset out;
  out.split_seed = seed;
  out.train.assign(std::make_move_iterator(windows.begin()),
                   std::make_move_iterator(windows.begin() + static_cast<std::ptrdiff_t>(n_train)));
  out.test.assign(std::make_move_iterator(windows.begin() + static_cast<std::ptrdiff_t>(n_train)),
                  std::make_move_iterator(windows.end()));
  return out;
}

PreparedData prepare_supervised(std::span<const DistrictMonthRecord> records, std::size_t timesteps,
                                const WindowSchema& schema, double ratio, std::uint64_t seed) {
  // First pass on raw values fixes the split boundary; the scaler must only
  // see months up to the last training target.
  auto raw = build_all_windows(records, timesteps, schema);
  auto raw_split = split_dataset(std::move(raw.windows), ratio, seed);
  const YearMonth cutoff = raw_split.train.back().target_month;

  std::vector<DistrictMonthRecord> fit_rows;
  for (const auto& r : records)
    if (r.month <= cutoff) fit_rows.push_back(r);
  auto features = schema.columns();
  PreparedData out;
  out.scaler = fit_scaler(fit_rows, features);
  out.schema = schema;
  out.timesteps = timesteps;

  const auto scaled = apply_scaler(out.scaler, records);
  auto windows = build_all_windows(scaled, timesteps, schema);
  out.gaps = std::move(windows.gaps);
  out.split = split_dataset(std::move(windows.windows), ratio, seed);
  return out;
}

}  // namespace dengue
