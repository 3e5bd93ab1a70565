#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dengue/dataprep.hpp"
#include "dengue/error.hpp"
#include "dengue/io.hpp"
#include "dengue/lstm.hpp"

namespace dengue {

// ---------------------------------------------------------------------------
// Synthetic data

struct DistrictSeasonality {
  double amplitude = 1.0;
  double phase = 0.0;  // months
};

/// Stand-in for the district-month surveillance data. Climate follows
/// seasonal sinusoids plus AR(1) anomalies; the larval index follows the
/// humidity anomaly, last month's rain anomaly, its own season and an AR(1)
/// control-measure term;
/// expected incidence is log-linear in the rain and temperature anomalies
/// `lag` months earlier and in beta * (larval index - 2).
struct SynthSpec {
  std::size_t districts = 26;
  std::size_t months = 84;
  int start_year = 2014;
  /// Per-district seasonality; drawn from the seed when empty.
  std::vector<DistrictSeasonality> seasonality;
  double beta = 1.0;
  double noise_sigma = 1.0;
  double missing_rate = 0.3;
  std::size_t lag = 2;
  std::int64_t houses_per_survey = 200;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LarvalAnswer {
  std::string district;
  YearMonth month;
  double larval_index = 0.0;
};

struct SynthBundle {
  std::vector<RawClimateReading> climate;
  std::vector<WeeklyRainfall> rain;
  std::vector<io::LarvalRow> larval;
  std::vector<CaseCount> cases;
  /// Weighted index of every survey, masked or not.
  std::vector<LarvalAnswer> answer;
};

SynthBundle synth_generate(const SynthSpec& spec);

std::string district_name(std::size_t index);

/// climate.csv, rain.csv, larval.csv, cases.csv and larval_answer.csv.
void write_bundle(const SynthBundle& bundle, const std::filesystem::path& dir);
std::string answer_csv(const std::vector<LarvalAnswer>& answer);
std::vector<LarvalAnswer> read_answer(const std::filesystem::path& path);

/// Runs the bundle through aggregation and the join, as `prepare` would.
std::vector<DistrictMonthRecord> bundle_records(const SynthBundle& bundle);

// ---------------------------------------------------------------------------
// Runs and sweeps

struct PredictionRow {
  std::string district;
  YearMonth month;
  double actual = 0.0;
  double predicted = 0.0;
  bool operator==(const PredictionRow&) const = default;
};

struct RunReport {
  std::string label;
  std::uint64_t seed = 0;
  /// MSE in case counts.
  double validation_mse = 0.0;
  double test_mse = 0.0;
  /// MSE on the min-max scaled target.
  double validation_mse_scaled = 0.0;
  double test_mse_scaled = 0.0;
  /// Variance of the raw test targets: the MSE of a perfect mean predictor.
  double test_target_variance = 0.0;
  std::size_t best_epoch = 0;
  /// Test-split predictions in case counts.
  std::vector<PredictionRow> predictions;
  double wall_clock_s = 0.0;
  /// Non-empty when the run failed (e.g. diverged).
  std::string error;
  std::optional<ErrorKind> failure;

  bool ok() const noexcept { return error.empty(); }
};

struct RunOutcome {
  RunReport report;
  std::optional<TrainedModel> model;
};

/// Prepares windows for `spec`, trains, and evaluates on the validation and
/// test splits. Training failures are caught and recorded in the report.
RunOutcome run_single(const ModelSpec& spec, std::span<const DistrictMonthRecord> records, double split_ratio,
                      const std::string& label);

enum class SweepKind { Variant, Timestep, Predictor, Architecture };

std::string sweep_kind_name(SweepKind kind);
SweepKind parse_sweep_kind(const std::string& name);

/// Changes applied to the base spec for one grid cell.
struct SpecDelta {
  std::string label;
  std::optional<Architecture> arch;
  std::optional<std::size_t> num_layers;
  std::optional<std::size_t> timesteps;
  std::optional<Variant> variant;
  std::optional<std::vector<Feature>> predictors;

  ModelSpec apply(ModelSpec base) const;
};

struct SweepSpec {
  SweepKind kind = SweepKind::Timestep;
  std::vector<SpecDelta> grid;
  std::vector<std::uint64_t> seeds = {1};
  ModelSpec base;
  double split_ratio = 0.85;

  void validate() const;
};

SweepSpec timestep_sweep(const ModelSpec& base, std::vector<std::uint64_t> seeds,
                         const std::vector<std::size_t>& steps = {2, 3, 4, 5});
/// Temperature, Rainfall, Relative Humidity, All three parameters.
SweepSpec predictor_sweep(const ModelSpec& base, std::vector<std::uint64_t> seeds);
SweepSpec architecture_sweep(const ModelSpec& base, std::vector<std::uint64_t> seeds);
SweepSpec variant_sweep(const ModelSpec& base, std::vector<std::uint64_t> seeds);

/// {"kind": "timestep", "seeds": [..], "base": {ModelSpec fields}, "grid":
/// [{"label": .., "timesteps": ..}, ..], "split_ratio": 0.85}. A missing
/// grid takes the default grid for the kind.
SweepSpec sweep_from_json(const std::string& text);

struct SweepRow {
  std::string label;
  double validation_mse = 0.0;
  double test_mse = 0.0;
  double validation_mse_scaled = 0.0;
  double test_mse_scaled = 0.0;
  std::size_t runs_ok = 0;
  std::size_t runs_failed = 0;
  bool best = false;
};

struct SweepResult {
  SweepKind kind = SweepKind::Timestep;
  /// One per grid cell, in grid order; means over successful seeds.
  std::vector<SweepRow> rows;
  /// Every (cell, seed) run, grid-major.
  std::vector<RunReport> reports;
  std::vector<std::optional<TrainedModel>> models;
  /// Row with the lowest mean validation MSE.
  std::optional<std::size_t> argmin;
};

struct SweepOptions {
  std::size_t jobs = 1;
  bool keep_models = false;
};

/// Trains every grid cell for every seed. Each run is seeded with
/// derive_seed(seed, label), so results do not depend on grid order or on
/// how runs are spread over workers.
SweepResult run_sweep(const SweepSpec& sweep, std::span<const DistrictMonthRecord> records,
                      const SweepOptions& options = {});

struct VariantPair {
  std::uint64_t seed = 0;
  double test_mse_variant1 = 0.0;
  double test_mse_variant2 = 0.0;
};

struct VariantComparison {
  std::vector<VariantPair> pairs;
  /// Share of seeds where variant II has the lower test MSE.
  double win_rate = 0.0;
};

VariantComparison compare_variants(std::span<const DistrictMonthRecord> records, const ModelSpec& base,
                                   const std::vector<std::uint64_t>& seeds, double split_ratio = 0.85,
                                   std::size_t jobs = 1);

// ---------------------------------------------------------------------------
// Reports

/// Twelve calendar-month rows by district, with integer (rounded half away
/// from zero) predictions and "Predicted Count" / "Actual Count" footers.
struct DistrictTable {
  int year = 0;
  std::vector<std::string> districts;
  /// [month 0..11][district]
  std::vector<std::vector<std::optional<double>>> predicted;
  std::vector<std::vector<std::optional<double>>> actual;

  long long predicted_count(std::size_t district) const;
  long long actual_count(std::size_t district) const;
};

long long round_count(double value);

/// Picks the latest year with the most months covered unless `year` is given;
/// keeps the first `max_districts` districts in name order.
DistrictTable build_district_table(std::span<const PredictionRow> predictions, std::optional<int> year = std::nullopt,
                                   std::size_t max_districts = 8);

std::string district_table_markdown(const DistrictTable& table, const std::string& title);
std::string district_table_csv(const DistrictTable& table);

std::string mse_table_markdown(SweepKind kind, std::span<const SweepRow> rows, const std::string& title = "");
std::string summary_csv(SweepKind kind, std::span<const SweepRow> rows);
struct SummaryFile {
  SweepKind kind = SweepKind::Timestep;
  std::vector<SweepRow> rows;
};
SummaryFile parse_summary_csv(const std::string& text);

/// Without wall-clock time, so reruns are byte-identical.
std::string runs_csv(std::span<const RunReport> reports);
/// Reports without predictions.
std::vector<RunReport> parse_runs_csv(const std::string& text);
std::string predictions_csv(std::span<const PredictionRow> rows);
std::vector<PredictionRow> parse_predictions_csv(const std::string& text);

/// Summary rows from individual reports: mean MSEs per label (first-seen
/// order) and the validation argmin flagged.
std::vector<SweepRow> summarize(std::span<const RunReport> reports);

struct RenderedTable {
  std::string name;
  std::string markdown;
  std::string csv;
};

/// The MSE comparison table over all reports plus one district table per
/// label (first seed). Throws EmptyInput for an empty list.
std::vector<RenderedTable> render_report(std::span<const RunReport> reports, SweepKind kind);

std::string slug(const std::string& label);

}  // namespace dengue
