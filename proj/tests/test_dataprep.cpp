#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "dengue/csv.hpp"
#include "dengue/dataprep.hpp"
#include "dengue/error.hpp"
#include "dengue/io.hpp"
#include "dengue/rng.hpp"

using namespace dengue;
using namespace std::chrono;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Validation;
}

DistrictMonthRecord record(const std::string& d, int y, int m, double cases, std::optional<double> larval = 2.0) {
  DistrictMonthRecord r;
  r.district = d;
  r.month = {y, m};
  r.temp_mean = 25.0 + m;
  r.rh_mean = 60.0 + 2 * m;
  r.rain_total = 10.0 * m + y % 10;
  r.larval_index = larval;
  r.cases = cases;
  return r;
}

std::vector<DistrictMonthRecord> series(const std::string& d, int months, int start_year = 2018) {
  std::vector<DistrictMonthRecord> out;
  YearMonth ym{start_year, 1};
  for (int i = 0; i < months; ++i, ym = ym.next()) out.push_back(record(d, ym.year, ym.month, 100 + i));
  return out;
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dengue_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("ISO week Thursdays match a day-by-day enumeration") {
  // Oracle: every date's ISO week is the week of its Thursday, and the ISO
  // year is that Thursday's calendar year.
  std::map<std::pair<int, int>, sys_days> thursdays;
  for (sys_days d = sys_days{year{2003} / January / 1}; d < sys_days{year{2031} / January / 1}; d += days{1}) {
    const weekday wd{d};
    const int iso_dow = wd.iso_encoding();  // 1 = Monday
    const sys_days thu = d + days{4 - iso_dow};
    const year_month_day t{thu};
    const int doy = (thu - sys_days{t.year() / January / 1}).count();
    thursdays[{static_cast<int>(t.year()), doy / 7 + 1}] = thu;
  }
  std::map<int, int> max_week;
  for (const auto& [key, thu] : thursdays) {
    max_week[key.first] = std::max(max_week[key.first], key.second);
    if (key.first < 2004 || key.first > 2029) continue;
    CHECK(sys_days{iso_week_thursday(key.first, key.second)} == thu);
  }
  for (int y = 2004; y <= 2029; ++y) {
    CHECK(iso_weeks_in_year(y) == max_week[y]);
    if (max_week[y] == 52) CHECK(kind_of([&] { iso_week_thursday(y, 53); }) == ErrorKind::Validation);
  }
  CHECK(iso_weeks_in_year(2020) == 53);
  CHECK(kind_of([] { iso_week_thursday(2020, 0); }) == ErrorKind::Validation);
}

TEST_CASE("dates parse strictly") {
  CHECK(parse_date("2019-02-28") == Date{year{2019}, February, day{28}});
  for (const char* bad : {"2019-02-29", "2019-2-28", "2019-13-01", "20190228", "2019-02-28x", ""}) {
    CHECK(kind_of([&] { parse_date(bad); }) == ErrorKind::Validation);
  }
  CHECK(format_date(parse_date("2020-12-31")) == "2020-12-31");
  CHECK((YearMonth{2019, 12}.next() == YearMonth{2020, 1}));
  CHECK((YearMonth{2020, 1}.prev() == YearMonth{2019, 12}));
}

TEST_CASE("daily climate averages per district and month") {
  std::vector<RawClimateReading> rows = {
      {"A", parse_date("2019-01-01"), 20.0, 50.0},
      {"A", parse_date("2019-01-02"), 24.0, 70.0},
      {"A", parse_date("2019-02-01"), 30.0, 80.0},
      {"B", parse_date("2019-01-01"), 10.0, 40.0},
  };
  const auto m = aggregate_monthly(rows);
  REQUIRE(m.size() == 3);
  const auto& a = m.at({"A", {2019, 1}});
  CHECK(a.temp_mean == doctest::Approx(22.0));
  CHECK(a.rh_mean == doctest::Approx(60.0));
  CHECK(a.readings == 2);
  CHECK(m.at({"B", {2019, 1}}).temp_mean == 10.0);

  CHECK(kind_of([] { aggregate_monthly(std::vector<RawClimateReading>{}); }) == ErrorKind::EmptyInput);
  rows.push_back({"A", parse_date("2019-01-02"), 1.0, 1.0});
  CHECK(kind_of([&] { aggregate_monthly(rows); }) == ErrorKind::DuplicateKey);
  rows.back() = {"A", parse_date("2019-01-03"), 1.0, 101.0};
  CHECK(kind_of([&] { aggregate_monthly(rows); }) == ErrorKind::Validation);
}

TEST_CASE("weekly rain lands in the month holding the ISO Thursday") {
  // 2019-W05 runs Mon 28 Jan .. Sun 3 Feb; its Thursday is 31 Jan.
  // 2019-W01 starts Mon 31 Dec 2018; its Thursday is 3 Jan 2019.
  const std::vector<WeeklyRainfall> weeks = {
      {"A", 2019, 1, 5.0}, {"A", 2019, 5, 7.0}, {"A", 2019, 6, 11.0}, {"A", 2020, 53, 2.0}};
  const auto m = rain_to_monthly(weeks);
  CHECK(m.at({"A", {2019, 1}}) == doctest::Approx(12.0));
  CHECK(m.at({"A", {2019, 2}}) == doctest::Approx(11.0));
  CHECK(m.at({"A", {2020, 12}}) == doctest::Approx(2.0));  // Thursday 31 Dec 2020

  std::vector<WeeklyRainfall> dup = {{"A", 2019, 1, 1.0}, {"A", 2019, 1, 1.0}};
  CHECK(kind_of([&] { rain_to_monthly(dup); }) == ErrorKind::DuplicateKey);
  std::vector<WeeklyRainfall> bad_week = {{"A", 2019, 53, 1.0}};
  CHECK(kind_of([&] { rain_to_monthly(bad_week); }) == ErrorKind::Validation);
  std::vector<WeeklyRainfall> negative = {{"A", 2019, 2, -1.0}};
  CHECK(kind_of([&] { rain_to_monthly(negative); }) == ErrorKind::Validation);
}

TEST_CASE("weighted larval index matches the band average on random counts") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const auto lo = static_cast<std::int64_t>(rng.below(50));
    const auto mid = static_cast<std::int64_t>(rng.below(50));
    const auto hi = static_cast<std::int64_t>(rng.below(50)) + 1;
    // Expand to one band value per house and average.
    double sum = 0.0;
    std::int64_t n = 0;
    for (std::int64_t i = 0; i < lo; ++i, ++n) sum += 1;
    for (std::int64_t i = 0; i < mid; ++i, ++n) sum += 2;
    for (std::int64_t i = 0; i < hi; ++i, ++n) sum += 3;
    const auto v = weighted_larval_index(lo, mid, hi);
    REQUIRE(v.has_value());
    CHECK(std::abs(*v - sum / static_cast<double>(n)) <= 1e-12);
    CHECK(*v >= 1.0);
    CHECK(*v <= 3.0);
  }
  CHECK_FALSE(weighted_larval_index(0, 0, 0).has_value());
  CHECK(*weighted_larval_index(4, 0, 0) == 1.0);
  CHECK(*weighted_larval_index(0, 0, 9) == 3.0);
  CHECK(kind_of([] { weighted_larval_index(-1, 2, 3); }) == ErrorKind::Validation);
}

TEST_CASE("assemble_records inner-joins and rejects duplicates") {
  std::map<DistrictMonth, ClimateMonthly> climate = {{{"A", {2019, 1}}, {25.0, 60.0, 31}},
                                                     {{"A", {2019, 2}}, {26.0, 61.0, 28}},
                                                     {{"B", {2019, 1}}, {27.0, 62.0, 31}}};
  std::map<DistrictMonth, double> rain = {{{"A", {2019, 1}}, 10.0}, {{"A", {2019, 2}}, 20.0}};
  std::vector<LarvalSurvey> larval = {{"A", {2019, 1}, 1, 1, 2}};
  std::vector<CaseCount> cases = {{"B", {2019, 1}, 5}, {"A", {2019, 2}, 7}, {"A", {2019, 1}, 3}};
  const auto recs = assemble_records(climate, rain, larval, cases);
  REQUIRE(recs.size() == 2);  // B has no rain
  CHECK(recs[0].month == YearMonth{2019, 1});
  CHECK(recs[0].larval_index == doctest::Approx(2.25));
  CHECK(recs[0].cases == 3.0);
  CHECK_FALSE(recs[1].larval_index.has_value());
  CHECK(recs[1].rain_total == 20.0);

  cases.push_back({"A", {2019, 1}, 9});
  CHECK(kind_of([&] { assemble_records(climate, rain, larval, cases); }) == ErrorKind::DuplicateKey);
  cases.pop_back();
  larval.push_back({"A", {2019, 1}, 1, 0, 0});
  CHECK(kind_of([&] { assemble_records(climate, rain, larval, cases); }) == ErrorKind::DuplicateKey);
}

TEST_CASE("windows put the target month last with its incidence slot zeroed") {
  const auto s = series("A", 6);
  const auto set = build_windows(s, 3, Variant::II);
  REQUIRE(set.windows.size() == 4);
  const auto& w = set.windows.front();
  CHECK(w.features.rows() == 3);
  CHECK(w.features.cols() == 5);  // temp, rh, rain, larval, cases
  CHECK(w.target == 102.0);
  CHECK(w.target_month == YearMonth{2018, 3});
  CHECK(w.features(0, 0) == s[0].temp_mean);
  CHECK(w.features(2, 2) == s[2].rain_total);
  CHECK(w.features(1, 3) == 2.0);
  CHECK(w.features(0, 4) == 100.0);
  CHECK(w.features(1, 4) == 101.0);
  CHECK(w.features(2, 4) == 0.0);

  const auto v1 = build_windows(s, 3, Variant::I);
  CHECK(v1.windows.front().features.cols() == 4);
  CHECK(kind_of([&] { build_windows(s, 1, Variant::I); }) == ErrorKind::Validation);
}

TEST_CASE("window count is n - t + 1 per district and gaps are reported") {
  for (std::size_t t = 2; t <= 5; ++t) {
    CHECK(build_windows(series("A", 12), t, Variant::I).windows.size() == 12 - t + 1);
  }
  auto s = series("A", 8);
  s.erase(s.begin() + 4);  // drop May
  const auto set = build_windows(s, 3, Variant::I);
  CHECK(set.gaps.gaps.size() == 1);
  CHECK(set.gaps.gaps[0].second == YearMonth{2018, 4});
  CHECK(set.gaps.skipped_windows == 2);
  CHECK(set.windows.size() == 3);
  for (const auto& w : set.windows) CHECK(w.target_month != YearMonth{2018, 6});

  auto unsorted = series("A", 4);
  std::swap(unsorted[1], unsorted[2]);
  CHECK(kind_of([&] { build_windows(unsorted, 2, Variant::I); }) == ErrorKind::Validation);
}

TEST_CASE("variant II without larval values is a precision error") {
  auto s = series("A", 5);
  auto b = series("B", 5);
  b[2].larval_index.reset();
  s.insert(s.end(), b.begin(), b.end());
  try {
    build_all_windows(s, 3, make_schema(Variant::II));
    FAIL("expected PrecisionError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Precision);
    CHECK(std::string(e.what()).find("B") != std::string::npos);
  }
  CHECK(build_all_windows(s, 3, make_schema(Variant::I)).windows.size() == 6);
}

TEST_CASE("split arithmetic and chronology") {
  CHECK(train_count(2184, 0.85) == 1856);
  CHECK(train_count(100, 0.85) == 85);
  CHECK(train_count(10, 0.5) == 5);
  CHECK(train_count(3, 0.1) == 0);

  std::vector<DistrictMonthRecord> recs;
  for (const char* d : {"C", "A", "B"}) {
    auto s = series(d, 10);
    recs.insert(recs.end(), s.begin(), s.end());
  }
  auto windows = build_all_windows(recs, 3, make_schema(Variant::I)).windows;
  const auto split = split_dataset(windows, 0.75, 9);
  CHECK(split.train.size() == 18);
  CHECK(split.test.size() == 6);
  CHECK(split.split_seed == 9);
  for (std::size_t i = 1; i < split.train.size(); ++i) {
    const auto& a = split.train[i - 1];
    const auto& b = split.train[i];
    CHECK((a.target_month < b.target_month || (a.target_month == b.target_month && a.district < b.district)));
  }
  for (const auto& te : split.test)
    for (const auto& tr : split.train) CHECK(tr.target_month <= te.target_month);

  CHECK(kind_of([] { split_dataset({}, 0.85, 1); }) == ErrorKind::EmptyInput);
  auto few = build_windows(series("A", 3), 3, Variant::I).windows;
  CHECK(kind_of([&] { split_dataset(few, 0.5, 1); }) == ErrorKind::EmptyTrain);
}

TEST_CASE("scaler maps to [0,1], inverts, and only sees training months") {
  auto recs = series("A", 24);
  recs.back().cases = 1e6;  // an outlier in the test period
  const auto data = prepare_supervised(recs, 3, make_schema(Variant::II), 0.75, 1);
  const auto& cases = data.scaler.range(Feature::Cases);
  CHECK(cases.max < 1e6);
  const YearMonth cutoff = data.split.train.back().target_month;
  double max_train_cases = 0;
  for (const auto& r : recs)
    if (r.month <= cutoff) max_train_cases = std::max(max_train_cases, r.cases);
  CHECK(cases.max == max_train_cases);
  for (const auto& w : data.split.train) {
    for (double v : w.features.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
  const auto scaled = apply_scaler(data.scaler, recs);
  const auto back = invert_scaler(data.scaler, scaled);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].cases == doctest::Approx(recs[i].cases));
    CHECK(back[i].temp_mean == doctest::Approx(recs[i].temp_mean));
  }

  std::vector<DistrictMonthRecord> flat = {record("A", 2019, 1, 5), record("A", 2019, 2, 5)};
  const std::vector<Feature> f = {Feature::Cases};
  const auto s = fit_scaler(flat, f);
  CHECK(s.scale(Feature::Cases, 5.0) == 0.0);
  CHECK(kind_of([] { Scaler().range(Feature::Cases); }) == ErrorKind::NotFitted);
}

TEST_CASE("csv helpers") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125}) CHECK(csv::parse_double(csv::format_double(v), "x") == v);
  CHECK(kind_of([] { csv::parse_double("1.5x", "f:2"); }) == ErrorKind::Validation);
  CHECK(kind_of([] { csv::parse_int("3.0", "f:2"); }) == ErrorKind::Validation);
  CHECK(csv::parse_uint("18446744073709551615", "x") == 18446744073709551615ULL);
}

TEST_CASE("input files round trip and errors carry file and line") {
  const auto dir = temp_dir("io");
  const std::vector<CaseCount> cases = {{"A", {2019, 1}, 3}, {"A", {2019, 2}, 0}};
  csv::write_file(dir / "cases.csv", io::cases_csv(cases));
  const auto back = io::read_cases(dir / "cases.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].cases == 3);
  CHECK(back[1].month == YearMonth{2019, 2});

  const std::vector<io::LarvalRow> larval = {{{"A", {2019, 1}, 1, 2, 3}, false}, {{"A", {2019, 2}, 4, 5, 6}, true}};
  csv::write_file(dir / "larval.csv", io::larval_csv(larval));
  const auto lb = io::read_larval(dir / "larval.csv");
  REQUIRE(lb.size() == 1);
  CHECK(lb[0].n_high == 3);

  csv::write_file(dir / "bad.csv", "district,year,month,cases\nA,2019,1,3\nA,2019,13,4\n");
  try {
    io::read_cases(dir / "bad.csv");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
  }
  CHECK(kind_of([&] { io::read_cases(dir / "nope.csv"); }) == ErrorKind::Io);

  auto recs = series("A", 3);
  recs[1].larval_index.reset();
  csv::write_file(dir / "records.csv", io::records_csv(recs));
  const auto rf = io::read_records(dir / "records.csv");
  CHECK(rf.records == recs);
  CHECK(rf.sources.empty());

  std::vector<io::LarvalSource> src = {io::LarvalSource::Observed, io::LarvalSource::Imputed, io::LarvalSource::Observed};
  recs[1].larval_index = 2.5;
  csv::write_file(dir / "imputed.csv", io::records_csv(recs, src));
  const auto imp = io::read_records(dir / "imputed.csv");
  CHECK(imp.sources == src);

  std::swap(recs[0], recs[1]);
  csv::write_file(dir / "unsorted.csv", io::records_csv(recs));
  CHECK(kind_of([&] { io::read_records(dir / "unsorted.csv"); }) == ErrorKind::Validation);
}
