#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "dengue/error.hpp"
#include "dengue/experiments.hpp"
#include "json.hpp"

namespace dengue {

namespace {

double variance(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be written
// by index so completion order never matters.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

}  // namespace

RunOutcome run_single(const ModelSpec& spec, std::span<const DistrictMonthRecord> records, double split_ratio,
                      const std::string& label) {
  RunOutcome out;
  auto& report = out.report;
  report.label = label;
  report.seed = spec.seed;
  const auto started = std::chrono::steady_clock::now();
  try {
    spec.validate();
    const auto data = prepare_supervised(records, spec.timesteps, spec.schema(), split_ratio, spec.seed);
    auto model = train(spec, data);

    const auto& tr = data.split.train;
    const std::size_t n_val =
        static_cast<std::size_t>(std::floor(spec.validation_fraction * static_cast<double>(tr.size())));
    const std::span<const SupervisedWindow> all(tr);
    const auto val_set = (n_val > 0 && n_val < tr.size()) ? all.last(n_val) : all;

    auto unscale = [&](double v) { return data.scaler.unscale(Feature::Cases, v); };
    auto evaluate = [&](std::span<const SupervisedWindow> set, double& mse_raw, double& mse_scaled,
                        std::vector<PredictionRow>* rows) {
      double sr = 0.0;
      double ss = 0.0;
      for (const auto& w : set) {
        const double pred = predict_scaled(model, w.features);
        const double err_scaled = pred - w.target;
        const double err_raw = unscale(pred) - unscale(w.target);
        ss += err_scaled * err_scaled;
        sr += err_raw * err_raw;
        if (rows) rows->push_back({w.district, w.target_month, unscale(w.target), unscale(pred)});
      }
      const double n = static_cast<double>(set.size());
      mse_raw = set.empty() ? 0.0 : sr / n;
      mse_scaled = set.empty() ? 0.0 : ss / n;
    };
    evaluate(val_set, report.validation_mse, report.validation_mse_scaled, nullptr);
    evaluate(data.split.test, report.test_mse, report.test_mse_scaled, &report.predictions);
    std::vector<double> targets;
    for (const auto& p : report.predictions) targets.push_back(p.actual);
    report.test_target_variance = variance(targets);
    report.best_epoch = model.best_epoch;
    out.model = std::move(model);
  } catch (const Error& e) {
    report.error = e.what();
    report.failure = e.kind();
  }
  report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

std::string sweep_kind_name(SweepKind kind) {
  switch (kind) {
    case SweepKind::Variant: return "variant";
    case SweepKind::Timestep: return "timestep";
    case SweepKind::Predictor: return "predictor";
    case SweepKind::Architecture: return "architecture";
  }
  return "?";
}

SweepKind parse_sweep_kind(const std::string& name) {
  for (auto k : {SweepKind::Variant, SweepKind::Timestep, SweepKind::Predictor, SweepKind::Architecture})
    if (sweep_kind_name(k) == name) return k;
  throw Error(ErrorKind::Validation, "unknown sweep kind '" + name + "' (variant, timestep, predictor, architecture)");
}

ModelSpec SpecDelta::apply(ModelSpec base) const {
  if (arch) base.arch = *arch;
  if (num_layers) base.num_layers = *num_layers;
  if (timesteps) base.timesteps = *timesteps;
  if (variant) base.variant = *variant;
  if (predictors) base.predictors = *predictors;
  return base;
}

void SweepSpec::validate() const {
  if (grid.empty()) throw Error(ErrorKind::Validation, "sweep grid is empty");
  if (seeds.empty()) throw Error(ErrorKind::Validation, "sweep needs at least one seed");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      if (grid[i].label == grid[j].label) throw Error(ErrorKind::Validation, "duplicate grid label '" + grid[i].label + "'");
    }
  }
}

SweepSpec timestep_sweep(const ModelSpec& base, std::vector<std::uint64_t> seeds, const std::vector<std::size_t>& steps) {
  SweepSpec s{SweepKind::Timestep, {}, std::move(seeds), base, 0.85};
  for (std::size_t t : steps) {
    SpecDelta d;
    d.label = "t = " + std::to_string(t);
    d.timesteps = t;
    s.grid.push_back(d);
  }
  return s;
}

SweepSpec predictor_sweep(const ModelSpec& base, std::vector<std::uint64_t> seeds) {
  SweepSpec s{SweepKind::Predictor, {}, std::move(seeds), base, 0.85};
  const std::pair<const char*, std::vector<Feature>> rows[] = {
      {"Temperature", {Feature::Temperature}},
      {"Rainfall", {Feature::Rainfall}},
      {"Relative Humidity", {Feature::Humidity}},
      {"All three parameters", all_climate_features()},
  };
  for (const auto& [label, features] : rows) {
    SpecDelta d;
    d.label = label;
    d.predictors = features;
    s.grid.push_back(d);
  }
  return s;
}

SweepSpec architecture_sweep(const ModelSpec& base, std::vector<std::uint64_t> seeds) {
  SweepSpec s{SweepKind::Architecture, {}, std::move(seeds), base, 0.85};
  for (auto a : {Architecture::Plain, Architecture::Stacked, Architecture::Bidirectional,
                 Architecture::BidirectionalStacked}) {
    SpecDelta d;
    d.label = architecture_label(a);
    d.arch = a;
    s.grid.push_back(d);
  }
  return s;
}

SweepSpec variant_sweep(const ModelSpec& base, std::vector<std::uint64_t> seeds) {
  SweepSpec s{SweepKind::Variant, {}, std::move(seeds), base, 0.85};
  for (auto v : {Variant::I, Variant::II}) {
    SpecDelta d;
    d.label = "Variant " + variant_name(v);
    d.variant = v;
    s.grid.push_back(d);
  }
  return s;
}

SweepSpec sweep_from_json(const std::string& text) {
  using nlohmann::json;
  try {
    const json j = json::parse(text);
    const SweepKind kind = parse_sweep_kind(j.at("kind").get<std::string>());
    ModelSpec base;
    if (j.contains("base")) base = spec_from_json(j.at("base").dump());
    std::vector<std::uint64_t> seeds = {1};
    if (j.contains("seeds")) seeds = j.at("seeds").get<std::vector<std::uint64_t>>();

    SweepSpec s;
    switch (kind) {
      case SweepKind::Variant: s = variant_sweep(base, seeds); break;
      case SweepKind::Timestep: s = timestep_sweep(base, seeds); break;
      case SweepKind::Predictor: s = predictor_sweep(base, seeds); break;
      case SweepKind::Architecture: s = architecture_sweep(base, seeds); break;
    }
    if (j.contains("split_ratio")) s.split_ratio = j.at("split_ratio").get<double>();
    if (j.contains("grid")) {
      s.grid.clear();
      for (const auto& cell : j.at("grid")) {
        SpecDelta d;
        d.label = cell.at("label").get<std::string>();
        if (cell.contains("arch")) d.arch = parse_architecture(cell.at("arch").get<std::string>());
        if (cell.contains("num_layers")) d.num_layers = cell.at("num_layers").get<std::size_t>();
        if (cell.contains("timesteps")) d.timesteps = cell.at("timesteps").get<std::size_t>();
        if (cell.contains("variant")) d.variant = parse_variant(cell.at("variant").get<std::string>());
        if (cell.contains("predictors")) {
          std::vector<Feature> fs;
          for (const auto& f : cell.at("predictors")) fs.push_back(parse_feature(f.get<std::string>()));
          d.predictors = fs;
        }
        s.grid.push_back(d);
      }
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Validation, std::string("sweep spec JSON: ") + e.what());
  }
}

std::vector<SweepRow> summarize(std::span<const RunReport> reports) {
  std::vector<SweepRow> rows;
  for (const auto& r : reports) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const SweepRow& row) { return row.label == r.label; });
    if (it == rows.end()) {
      rows.push_back(SweepRow{r.label});
      it = rows.end() - 1;
    }
    if (!r.ok()) {
      ++it->runs_failed;
      continue;
    }
    ++it->runs_ok;
    it->validation_mse += r.validation_mse;
    it->test_mse += r.test_mse;
    it->validation_mse_scaled += r.validation_mse_scaled;
    it->test_mse_scaled += r.test_mse_scaled;
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& row = rows[i];
    if (row.runs_ok == 0) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.validation_mse = row.test_mse = row.validation_mse_scaled = row.test_mse_scaled = nan;
      continue;
    }
    const double n = static_cast<double>(row.runs_ok);
    row.validation_mse /= n;
    row.test_mse /= n;
    row.validation_mse_scaled /= n;
    row.test_mse_scaled /= n;
    if (!best || row.validation_mse < rows[*best].validation_mse) best = i;
  }
  if (best) rows[*best].best = true;
  return rows;
}

SweepResult run_sweep(const SweepSpec& sweep, std::span<const DistrictMonthRecord> records,
                      const SweepOptions& options) {
  sweep.validate();
  const std::size_t n_cells = sweep.grid.size();
  const std::size_t n_seeds = sweep.seeds.size();
  SweepResult result;
  result.kind = sweep.kind;
  result.reports.resize(n_cells * n_seeds);
  result.models.resize(n_cells * n_seeds);

  parallel_for(n_cells * n_seeds, options.jobs, [&](std::size_t task) {
    const auto& cell = sweep.grid[task / n_seeds];
    const std::uint64_t seed = sweep.seeds[task % n_seeds];
    ModelSpec spec = cell.apply(sweep.base);
    spec.seed = derive_seed(seed, cell.label);
    auto outcome = run_single(spec, records, sweep.split_ratio, cell.label);
    result.reports[task] = std::move(outcome.report);
    if (options.keep_models) result.models[task] = std::move(outcome.model);
  });

  result.rows = summarize(result.reports);
  for (std::size_t i = 0; i < result.rows.size(); ++i)
    if (result.rows[i].best) result.argmin = i;
  return result;
}

VariantComparison compare_variants(std::span<const DistrictMonthRecord> records, const ModelSpec& base,
                                   const std::vector<std::uint64_t>& seeds, double split_ratio, std::size_t jobs) {
  // Surface a missing larval column up front rather than as per-run failures.
  {
    ModelSpec probe = base;
    probe.variant = Variant::II;
    build_all_windows(records, probe.timesteps, probe.schema());
  }
  VariantComparison out;
  out.pairs.resize(seeds.size());
  std::vector<std::string> errors(seeds.size() * 2);
  parallel_for(seeds.size() * 2, jobs, [&](std::size_t task) {
    const std::size_t i = task / 2;
    ModelSpec spec = base;
    spec.seed = seeds[i];
    spec.variant = task % 2 == 0 ? Variant::I : Variant::II;
    const auto outcome = run_single(spec, records, split_ratio, "Variant " + variant_name(spec.variant));
    out.pairs[i].seed = seeds[i];
    if (!outcome.report.ok()) errors[task] = outcome.report.error;
    (spec.variant == Variant::I ? out.pairs[i].test_mse_variant1 : out.pairs[i].test_mse_variant2) =
        outcome.report.test_mse;
  });
  for (const auto& e : errors)
    if (!e.empty()) throw Error(ErrorKind::Numerical, "variant comparison run failed: " + e);
  std::size_t wins = 0;
  for (const auto& p : out.pairs)
    if (p.test_mse_variant2 < p.test_mse_variant1) ++wins;
  out.win_rate = seeds.empty() ? 0.0 : static_cast<double>(wins) / static_cast<double>(seeds.size());
  return out;
}

}  // namespace dengue
