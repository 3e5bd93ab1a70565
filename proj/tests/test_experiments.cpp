#include <cmath>
#include <map>

#include "doctest.h"
#include "dengue/error.hpp"
#include "dengue/experiments.hpp"
#include "dengue/imputation.hpp"
#include "dengue/io.hpp"

using namespace dengue;

namespace {

SynthSpec small_synth(std::uint64_t seed = 3) {
  SynthSpec s;
  s.seed = seed;
  s.districts = 4;
  s.months = 30;
  return s;
}

ModelSpec quick_spec() {
  ModelSpec s;
  s.hidden = 4;
  s.epochs = 3;
  s.num_layers = 2;
  return s;
}

std::vector<DistrictMonthRecord> small_imputed(std::uint64_t seed = 3) {
  CoregCfg cfg;
  cfg.seed = seed;
  return impute_larval(bundle_records(synth_generate(small_synth(seed))), cfg).records;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

PredictionRow row(const std::string& d, int y, int m, double actual, double predicted) {
  return {d, YearMonth{y, m}, actual, predicted};
}

}  // namespace

TEST_CASE("synthetic generator is deterministic per seed") {
  const auto a = synth_generate(small_synth(9)), b = synth_generate(small_synth(9)), c = synth_generate(small_synth(10));
  CHECK(io::cases_csv(a.cases) == io::cases_csv(b.cases));
  CHECK(io::climate_csv(a.climate) == io::climate_csv(b.climate));
  CHECK(io::larval_csv(a.larval) == io::larval_csv(b.larval));
  CHECK(answer_csv(a.answer) == answer_csv(b.answer));
  CHECK(io::cases_csv(a.cases) != io::cases_csv(c.cases));
}

TEST_CASE("default generator covers 26 districts over 84 months") {
  const auto bundle = synth_generate(SynthSpec{});
  CHECK(bundle.cases.size() == 2184);
  const auto recs = bundle_records(bundle);
  CHECK(recs.size() == 2184);
  std::map<std::string, int> per_district;
  for (const auto& r : recs) ++per_district[r.district];
  CHECK(per_district.size() == 26);
  for (const auto& [d, n] : per_district) CHECK(n == 84);
}

TEST_CASE("with no masking every record carries the answer-key larval index") {
  auto spec = small_synth();
  spec.missing_rate = 0.0;
  const auto bundle = synth_generate(spec);
  const auto recs = bundle_records(bundle);
  std::map<std::pair<std::string, int>, double> truth;
  for (const auto& a : bundle.answer) truth[{a.district, a.month.ordinal()}] = a.larval_index;
  REQUIRE(recs.size() == truth.size());
  for (const auto& r : recs) {
    REQUIRE(r.larval_index.has_value());
    CHECK(*r.larval_index == doctest::Approx(truth.at({r.district, r.month.ordinal()})).epsilon(1e-12));
  }
}

TEST_CASE("masking rate is roughly honoured") {
  auto spec = SynthSpec{};
  spec.missing_rate = 0.3;
  const auto recs = bundle_records(synth_generate(spec));
  std::size_t missing = 0;
  for (const auto& r : recs) missing += !r.larval_index;
  const double rate = static_cast<double>(missing) / static_cast<double>(recs.size());
  CHECK(rate > 0.25);
  CHECK(rate < 0.35);
}

TEST_CASE("beta = 0 leaves cases uncorrelated with the larval index") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SynthSpec spec;
    spec.seed = seed;
    spec.beta = 0.0;
    spec.missing_rate = 0.0;
    std::vector<double> li, cases;
    for (const auto& r : bundle_records(synth_generate(spec))) {
      li.push_back(*r.larval_index);
      cases.push_back(r.cases);
    }
    CHECK(std::abs(pearson(li, cases)) < 0.1);
  }
}

TEST_CASE("positive beta couples cases to the larval index") {
  SynthSpec spec;
  spec.beta = 1.0;
  spec.missing_rate = 0.0;
  std::vector<double> li, cases;
  for (const auto& r : bundle_records(synth_generate(spec))) {
    li.push_back(*r.larval_index);
    cases.push_back(r.cases);
  }
  CHECK(pearson(li, cases) > 0.2);
}

TEST_CASE("answer file round trips") {
  const auto bundle = synth_generate(small_synth());
  const auto dir = std::filesystem::temp_directory_path() / "dengue_test_answer";
  std::filesystem::create_directories(dir);
  write_bundle(bundle, dir);
  const auto back = read_answer(dir / "larval_answer.csv");
  REQUIRE(back.size() == bundle.answer.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].district == bundle.answer[i].district);
    CHECK(back[i].month == bundle.answer[i].month);
    CHECK(back[i].larval_index == bundle.answer[i].larval_index);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("round_count rounds half away from zero") {
  CHECK(round_count(2.5) == 3);
  CHECK(round_count(-2.5) == -3);
  CHECK(round_count(2.4999) == 2);
  CHECK(round_count(-0.4) == 0);
  CHECK(round_count(-7.6) == -8);
}

TEST_CASE("district table has twelve month rows and count footers") {
  std::vector<PredictionRow> preds = {
      row("B", 2020, 1, 10, 9.5),  row("B", 2020, 2, 4, -1.5), row("A", 2020, 1, 3.5, 2.4),
      row("A", 2020, 12, 0, 7.5),  row("A", 2019, 5, 1, 1),
  };
  const auto table = build_district_table(preds);
  CHECK(table.year == 2020);
  REQUIRE(table.districts == std::vector<std::string>{"A", "B"});
  // A: 2 + 8 = 10; B: 10 + (-2) = 8. Negative predictions are kept.
  CHECK(table.predicted_count(0) == 10);
  CHECK(table.predicted_count(1) == 8);
  CHECK(table.actual_count(0) == 4);
  CHECK(table.actual_count(1) == 14);

  const auto md = district_table_markdown(table, "");
  std::size_t body = 0;
  for (const char* m : {"Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"})
    body += md.find(std::string("| ") + m + " |") != std::string::npos;
  CHECK(body == 12);
  CHECK(md.find("| Feb | - | -2 |") != std::string::npos);
  CHECK(md.find("| Predicted Count | 10 | 8 |") != std::string::npos);
  CHECK(md.find("| Actual Count | 4 | 14 |") != std::string::npos);

  const auto y2019 = build_district_table(preds, 2019);
  CHECK(y2019.districts == std::vector<std::string>{"A"});
  CHECK(y2019.predicted_count(0) == 1);
}

TEST_CASE("district table keeps the first districts in name order") {
  std::vector<PredictionRow> preds;
  for (const char* d : {"E", "C", "A", "D", "B"}) preds.push_back(row(d, 2021, 3, 1, 1));
  CHECK(build_district_table(preds, std::nullopt, 3).districts == std::vector<std::string>{"A", "B", "C"});
}

TEST_CASE("render_report rejects an empty run list") {
  try {
    render_report({}, SweepKind::Timestep);
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyInput);
  }
}

TEST_CASE("summary, runs and predictions CSV round trip exactly") {
  std::vector<SweepRow> rows = {{"t = 2", 0.1 + 0.2, 1.0 / 3.0, 1e-17, 123456.789, 2, 1, false},
                                {"t = 3", 0.05, 2.0 / 7.0, 3e-3, 99.5, 3, 0, true}};
  const auto s = parse_summary_csv(summary_csv(SweepKind::Timestep, rows));
  CHECK(s.kind == SweepKind::Timestep);
  REQUIRE(s.rows.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(s.rows[i].label == rows[i].label);
    CHECK(s.rows[i].validation_mse == rows[i].validation_mse);
    CHECK(s.rows[i].test_mse == rows[i].test_mse);
    CHECK(s.rows[i].validation_mse_scaled == rows[i].validation_mse_scaled);
    CHECK(s.rows[i].test_mse_scaled == rows[i].test_mse_scaled);
    CHECK(s.rows[i].runs_ok == rows[i].runs_ok);
    CHECK(s.rows[i].runs_failed == rows[i].runs_failed);
    CHECK(s.rows[i].best == rows[i].best);
  }

  RunReport r;
  r.label = "Bidirectional LSTM";
  r.seed = 18446744073709551615ull;
  r.validation_mse = 1.0 / 3.0;
  r.test_mse = 2.5e10;
  r.best_epoch = 17;
  RunReport f = r;
  f.seed = 2;
  f.error = "Divergence: epoch 3, loss nan";
  const std::vector<RunReport> reports = {r, f};
  const auto back = parse_runs_csv(runs_csv(reports));
  REQUIRE(back.size() == 2);
  CHECK(back[0].seed == r.seed);
  CHECK(back[0].validation_mse == r.validation_mse);
  CHECK(back[0].test_mse == r.test_mse);
  CHECK(back[0].best_epoch == 17);
  CHECK(back[0].ok());
  CHECK(!back[1].ok());

  std::vector<PredictionRow> preds = {row("Colombo", 2019, 11, 12, 11.123456789012345), row("Kandy", 2020, 1, 0, -0.1)};
  const auto pback = parse_predictions_csv(predictions_csv(preds));
  REQUIRE(pback.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(pback[i].district == preds[i].district);
    CHECK(pback[i].month == preds[i].month);
    CHECK(pback[i].actual == preds[i].actual);
    CHECK(pback[i].predicted == preds[i].predicted);
  }
}

TEST_CASE("summarize averages successful runs and flags the lowest validation MSE") {
  auto rep = [](const std::string& label, double val, double test, bool ok) {
    RunReport r;
    r.label = label;
    r.validation_mse = val;
    r.test_mse = test;
    if (!ok) r.error = "failed";
    return r;
  };
  const std::vector<RunReport> reports = {rep("a", 4, 10, true), rep("b", 1, 30, true), rep("a", 2, 20, true),
                                          rep("b", 100, 100, false), rep("c", 0, 0, false)};
  const auto rows = summarize(reports);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].label == "a");
  CHECK(rows[0].validation_mse == 3.0);
  CHECK(rows[0].test_mse == 15.0);
  CHECK(rows[0].runs_ok == 2);
  CHECK(rows[1].validation_mse == 1.0);
  CHECK(rows[1].runs_failed == 1);
  CHECK(rows[1].best);
  CHECK(!rows[0].best);
  CHECK(std::isnan(rows[2].validation_mse));
  CHECK(!rows[2].best);
}

TEST_CASE("grids have the expected labels") {
  const auto base = quick_spec();
  const auto p = predictor_sweep(base, {1});
  REQUIRE(p.grid.size() == 4);
  CHECK(p.grid[0].label == "Temperature");
  CHECK(p.grid[3].label == "All three parameters");
  CHECK(timestep_sweep(base, {1}).grid.size() == 4);
  CHECK(architecture_sweep(base, {1}).grid.size() == 4);
  CHECK(variant_sweep(base, {1}).grid.size() == 2);
  SweepSpec empty;
  empty.seeds = {1};
  CHECK_THROWS_AS(empty.validate(), Error);
}

TEST_CASE("sweep JSON overrides the base and grid") {
  const auto s = sweep_from_json(
      R"({"kind": "timestep", "seeds": [4, 5], "base": {"hidden": 3, "epochs": 2},
          "grid": [{"label": "t = 2", "timesteps": 2}, {"label": "t = 6", "timesteps": 6}], "split_ratio": 0.8})");
  CHECK(s.kind == SweepKind::Timestep);
  CHECK(s.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(s.base.hidden == 3);
  CHECK(s.split_ratio == 0.8);
  REQUIRE(s.grid.size() == 2);
  CHECK(s.grid[1].apply(s.base).timesteps == 6);
  CHECK_THROWS_AS(sweep_from_json(R"({"kind": "nope"})"), Error);
}

TEST_CASE("single-cell sweep has one row which is the argmin") {
  const auto recs = small_imputed();
  const auto result = run_sweep(timestep_sweep(quick_spec(), {1}, {3}), recs);
  REQUIRE(result.rows.size() == 1);
  REQUIRE(result.argmin.has_value());
  CHECK(*result.argmin == 0);
  CHECK(result.rows[0].best);
}

TEST_CASE("sweep results do not depend on the number of workers") {
  const auto recs = small_imputed();
  const auto spec = predictor_sweep(quick_spec(), {1, 2});
  const auto serial = run_sweep(spec, recs, {1, false});
  const auto parallel = run_sweep(spec, recs, {3, false});
  REQUIRE(serial.reports.size() == 8);
  REQUIRE(parallel.reports.size() == 8);
  CHECK(runs_csv(serial.reports) == runs_csv(parallel.reports));
  CHECK(summary_csv(SweepKind::Predictor, serial.rows) == summary_csv(SweepKind::Predictor, parallel.rows));
  CHECK(mse_table_markdown(SweepKind::Predictor, serial.rows).find("| Temperature |") != std::string::npos);
}

TEST_CASE("run_single reports scaled and raw errors and one prediction per test window") {
  const auto recs = small_imputed();
  const auto out = run_single(quick_spec(), recs, 0.85, "x");
  REQUIRE(out.report.ok());
  CHECK(out.model.has_value());
  CHECK(std::isfinite(out.report.test_mse));
  CHECK(out.report.test_mse_scaled > 0);
  // Four districts, 27 windows each at t = 3; floor(0.85 * 108) = 91.
  CHECK(out.report.predictions.size() == 108 - 91);
  double mean = 0, var = 0, se = 0;
  for (const auto& p : out.report.predictions) mean += p.actual;
  mean /= static_cast<double>(out.report.predictions.size());
  for (const auto& p : out.report.predictions) {
    var += (p.actual - mean) * (p.actual - mean);
    se += (p.actual - p.predicted) * (p.actual - p.predicted);
  }
  const double n = static_cast<double>(out.report.predictions.size());
  CHECK(out.report.test_target_variance == doctest::Approx(var / n).epsilon(1e-12));
  CHECK(out.report.test_mse == doctest::Approx(se / n).epsilon(1e-9));
}

TEST_CASE("variant comparison needs a complete larval index and is repeatable") {
  const auto raw = bundle_records(synth_generate(small_synth()));
  try {
    compare_variants(raw, quick_spec(), {1});
    FAIL("expected PrecisionError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Precision);
  }
  const auto recs = small_imputed();
  const auto a = compare_variants(recs, quick_spec(), {1, 2});
  const auto b = compare_variants(recs, quick_spec(), {1, 2}, 0.85, 2);
  REQUIRE(a.pairs.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.pairs[i].test_mse_variant1 == b.pairs[i].test_mse_variant1);
    CHECK(a.pairs[i].test_mse_variant2 == b.pairs[i].test_mse_variant2);
  }
  CHECK(a.win_rate >= 0.0);
  CHECK(a.win_rate <= 1.0);
}

TEST_CASE("slug") {
  CHECK(slug("Bidirectional Stacked LSTM") == "bidirectional_stacked_lstm");
  CHECK(slug("t = 3") == "t_3");
  CHECK(slug("All three parameters") == "all_three_parameters");
}

TEST_CASE("render_report produces an MSE table and a district table per label") {
  const auto recs = small_imputed();
  const auto result = run_sweep(timestep_sweep(quick_spec(), {1}, {2, 3}), recs);
  const auto tables = render_report(result.reports, SweepKind::Timestep);
  REQUIRE(tables.size() == 3);
  CHECK(tables[0].name == "mse_timestep");
  CHECK(tables[0].markdown.find("Validation data") != std::string::npos);
  CHECK(tables[1].name == "districts_t_2");
  CHECK(tables[2].name == "districts_t_3");
  CHECK(tables[1].markdown.find("| Predicted Count |") != std::string::npos);
}
