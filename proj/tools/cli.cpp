#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "dengue/csv.hpp"
#include "dengue/error.hpp"
#include "dengue/experiments.hpp"
#include "dengue/imputation.hpp"
#include "dengue/io.hpp"

namespace dengue::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  std::string out = "run";
  std::size_t jobs = 1;
  std::string config;
  bool verbose = false;
};

// ModelSpec flags, named after the spec fields. Only flags given on the
// command line override the --config file.
struct ModelFlags {
  std::string arch;
  std::size_t num_layers = 0;
  std::size_t hidden = 0;
  double dropout = 0;
  std::size_t epochs = 0;
  double l2_lambda = 0;
  std::size_t timesteps = 0;
  std::string variant;
  std::string predictors;
  double learning_rate = 0;
  std::string optimizer;
  double validation_fraction = 0;
  std::vector<CLI::Option*> options;

  void attach(CLI::App* app) {
    options = {
        app->add_option("--arch", arch, "plain, stacked, bidir or bidir_stacked"),
        app->add_option("--num_layers", num_layers, "LSTM layers for the stacked architectures"),
        app->add_option("--hidden", hidden, "hidden units per direction"),
        app->add_option("--dropout", dropout, "dropout rate in [0, 1)"),
        app->add_option("--epochs", epochs, "training epochs"),
        app->add_option("--l2_lambda", l2_lambda, "L2 penalty on weights"),
        app->add_option("--timesteps", timesteps, "months per window"),
        app->add_option("--variant", variant, "I (climate only) or II (climate + larval index)"),
        app->add_option("--predictors", predictors, "comma list of temperature, humidity, rainfall"),
        app->add_option("--learning_rate", learning_rate, "optimizer step size"),
        app->add_option("--optimizer", optimizer, "adam or sgd"),
        app->add_option("--validation_fraction", validation_fraction, "trailing share of train held out"),
    };
  }

  bool given(std::size_t i) const { return options[i]->count() > 0; }

  ModelSpec resolve(const Globals& g, const CLI::App& root) const {
    ModelSpec s;
    if (!g.config.empty()) s = spec_from_json(read_text(g.config));
    if (root.get_option("--seed")->count() > 0 || g.config.empty()) s.seed = g.seed;
    if (given(0)) s.arch = parse_architecture(arch);
    if (given(1)) s.num_layers = num_layers;
    if (given(2)) s.hidden = hidden;
    if (given(3)) s.dropout = dropout;
    if (given(4)) s.epochs = epochs;
    if (given(5)) s.l2_lambda = l2_lambda;
    if (given(6)) s.timesteps = timesteps;
    if (given(7)) s.variant = parse_variant(variant);
    if (given(8)) {
      s.predictors.clear();
      for (const auto& name : split_list(predictors)) s.predictors.push_back(parse_feature(name));
    }
    if (given(9)) s.learning_rate = learning_rate;
    if (given(10)) {
      if (optimizer == "adam") s.optimizer = OptimizerKind::Adam;
      else if (optimizer == "sgd") s.optimizer = OptimizerKind::Sgd;
      else throw Error(ErrorKind::Validation, "unknown optimizer '" + optimizer + "'");
    }
    if (given(11)) s.validation_fraction = validation_fraction;
    s.validate();
    return s;
  }

  static std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ','))
      if (!item.empty()) out.push_back(item);
    return out;
  }
};

std::string read_text(const fs::path& path) { return ModelFlags::read_text(path); }

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw Error(ErrorKind::Io, "missing input file: " + path.string());
}

fs::path default_records(const fs::path& out, Variant v) {
  return out / (v == Variant::II ? "imputed.csv" : "records.csv");
}

std::string mse_line(const RunReport& r) {
  std::ostringstream s;
  s << "validation_mse=" << csv::format_double(r.validation_mse) << " test_mse=" << csv::format_double(r.test_mse)
    << " validation_mse_scaled=" << csv::format_double(r.validation_mse_scaled)
    << " test_mse_scaled=" << csv::format_double(r.test_mse_scaled)
    << " mean_baseline_mse=" << csv::format_double(r.test_target_variance) << " best_epoch=" << r.best_epoch;
  return s.str();
}

std::string run_stem(const RunReport& r) { return slug(r.label) + "_" + std::to_string(r.seed); }

void write_tables(const fs::path& dir, std::span<const RunReport> reports, SweepKind kind, std::ostream& out) {
  for (const auto& t : render_report(reports, kind)) {
    csv::write_file(dir / "tables" / (t.name + ".md"), t.markdown);
    csv::write_file(dir / "reports" / ("table_" + t.name + ".csv"), t.csv);
    if (t.name.starts_with("mse_")) out << t.markdown;
  }
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Divergence:
    case ErrorKind::Numerical: return kDiverged;
    default: return kInputError;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monthly dengue incidence forecasting with LSTM models", "dengue"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "base seed; every random stream is derived from it")->capture_default_str();
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads for sweeps")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "JSON file with ModelSpec fields");
  app.add_flag("-v,--verbose", g.verbose, "print timings");

  std::function<int()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic district-month dataset");
  SynthSpec ss;
  synth->add_option("--districts", ss.districts)->capture_default_str();
  synth->add_option("--months", ss.months)->capture_default_str();
  synth->add_option("--start_year", ss.start_year)->capture_default_str();
  synth->add_option("--beta", ss.beta, "log-incidence slope on the larval index")->capture_default_str();
  synth->add_option("--noise_sigma", ss.noise_sigma)->capture_default_str();
  synth->add_option("--missing_rate", ss.missing_rate, "share of larval surveys masked")->capture_default_str();
  synth->add_option("--lag", ss.lag, "months between climate anomalies and incidence")->capture_default_str();
  synth->add_option("--houses_per_survey", ss.houses_per_survey)->capture_default_str();
  synth->callback([&] {
    action = [&] {
      ss.seed = g.seed;
      const auto bundle = synth_generate(ss);
      write_bundle(bundle, g.out);
      out << "wrote " << bundle.climate.size() << " climate readings, " << bundle.rain.size() << " rain weeks, "
          << bundle.larval.size() << " larval surveys and " << bundle.cases.size() << " case counts to " << g.out
          << "\n";
      return kOk;
    };
  });

  // prepare
  auto* prepare = app.add_subcommand("prepare", "aggregate raw CSVs into records.csv");
  std::string climate_path, rain_path, larval_path, cases_path;
  std::size_t prep_t = 3;
  prepare->add_option("--climate", climate_path, "daily climate CSV (default <out>/climate.csv)");
  prepare->add_option("--rain", rain_path, "weekly rainfall CSV (default <out>/rain.csv)");
  prepare->add_option("--larval", larval_path, "larval survey CSV (default <out>/larval.csv if present)");
  prepare->add_option("--cases", cases_path, "monthly case CSV (default <out>/cases.csv)");
  prepare->add_option("--timesteps", prep_t, "window length used for the gap report")->capture_default_str();
  prepare->callback([&] {
    action = [&] {
      const fs::path dir = g.out;
      const fs::path climate = climate_path.empty() ? dir / "climate.csv" : fs::path(climate_path);
      const fs::path rain = rain_path.empty() ? dir / "rain.csv" : fs::path(rain_path);
      const fs::path cases = cases_path.empty() ? dir / "cases.csv" : fs::path(cases_path);
      fs::path larval = larval_path.empty() ? dir / "larval.csv" : fs::path(larval_path);
      for (const auto& p : {climate, rain, cases}) require_file(p);
      if (!larval_path.empty()) require_file(larval);

      std::vector<LarvalSurvey> surveys;
      if (fs::is_regular_file(larval)) surveys = io::read_larval(larval);
      const auto records = assemble_records(aggregate_monthly(io::read_climate(climate)),
                                            rain_to_monthly(io::read_rain(rain)), surveys, io::read_cases(cases));
      csv::write_file(dir / "records.csv", io::records_csv(records));
      const auto windows = build_all_windows(records, prep_t, make_schema(Variant::I, all_climate_features()));
      std::size_t observed = 0;
      for (const auto& r : records) observed += r.larval_index.has_value();
      out << "records=" << records.size() << " larval_observed=" << observed
          << " windows=" << windows.windows.size() << " skipped_windows=" << windows.gaps.skipped_windows << "\n";
      for (const auto& [district, month] : windows.gaps.gaps)
        out << "gap after " << district << " " << month.to_string() << "\n";
      return kOk;
    };
  });

  // impute
  auto* impute = app.add_subcommand("impute", "fill missing larval indices with COREG");
  std::string impute_in;
  CoregCfg coreg;
  impute->add_option("--records", impute_in, "input records (default <out>/records.csv)");
  impute->add_option("--k1", coreg.first.k)->capture_default_str();
  impute->add_option("--p1", coreg.first.p)->capture_default_str();
  impute->add_option("--k2", coreg.second.k)->capture_default_str();
  impute->add_option("--p2", coreg.second.p)->capture_default_str();
  impute->add_option("--pool_size", coreg.pool_size)->capture_default_str();
  impute->add_option("--max_iters", coreg.max_iters)->capture_default_str();
  impute->callback([&] {
    action = [&] {
      const fs::path dir = g.out;
      const fs::path in = impute_in.empty() ? dir / "records.csv" : fs::path(impute_in);
      require_file(in);
      const auto file = io::read_records(in);
      coreg.seed = derive_seed(g.seed, "coreg");
      ImputationOutcome result;
      try {
        result = impute_larval(file.records, coreg);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyTrain) throw;
        err << "cannot co-train: " << e.what() << "\n";
        return kPrecondition;
      }
      csv::write_file(dir / "imputed.csv", io::records_csv(result.records, result.sources));
      csv::write_file(dir / "imputation_log.txt", result.log.to_text());
      out << "observed=" << result.observed << " imputed=" << result.imputed
          << " iterations=" << result.log.entries.size() << " stop=" << result.log.stop_reason << "\n";
      return kOk;
    };
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "train one model and save it");
  ModelFlags train_flags;
  train_flags.attach(train_cmd);
  std::string train_in, model_name = "model";
  double train_ratio = 0.85;
  train_cmd->add_option("--records", train_in, "input records (default <out>/imputed.csv or records.csv)");
  train_cmd->add_option("--split_ratio", train_ratio, "chronological train share")->capture_default_str();
  train_cmd->add_option("--name", model_name, "file stem under models/ and reports/")->capture_default_str();
  train_cmd->callback([&] {
    action = [&] {
      const fs::path dir = g.out;
      const ModelSpec spec = train_flags.resolve(g, app);
      const fs::path in = train_in.empty() ? default_records(dir, spec.variant) : fs::path(train_in);
      require_file(in);
      const auto file = io::read_records(in);
      auto outcome = run_single(spec, file.records, train_ratio, model_name);
      const auto& r = outcome.report;
      if (!r.ok()) {
        err << r.error << "\n";
        return exit_code(*r.failure);
      }
      save_model(*outcome.model, dir / "models" / (model_name + ".bin"), dir / "models" / (model_name + ".json"));
      csv::write_file(dir / "reports" / ("loss_" + model_name + ".csv"), loss_history_csv(outcome.model->loss_history));
      csv::write_file(dir / "reports" / ("pred_" + model_name + ".csv"), predictions_csv(r.predictions));
      csv::write_file(dir / "log.txt", "train " + model_name + " seed=" + std::to_string(r.seed) + " " + mse_line(r) + "\n");
      out << mse_line(r) << "\n";
      if (g.verbose) err << "wall_clock_s=" << r.wall_clock_s << "\n";
      return kOk;
    };
  });

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "predict every window with a saved model");
  std::string model_stem, predict_in;
  predict_cmd->add_option("--model", model_stem, "model path without extension (default <out>/models/model)");
  predict_cmd->add_option("--records", predict_in, "input records (default by the model's variant)");
  predict_cmd->callback([&] {
    action = [&] {
      const fs::path dir = g.out;
      const fs::path stem = model_stem.empty() ? dir / "models" / "model" : fs::path(model_stem);
      const fs::path bin = fs::path(stem.string() + ".bin");
      const fs::path sidecar = fs::path(stem.string() + ".json");
      require_file(bin);
      require_file(sidecar);
      const auto model = load_model(bin, sidecar);
      const fs::path in = predict_in.empty() ? default_records(dir, model.spec.variant) : fs::path(predict_in);
      require_file(in);
      const auto file = io::read_records(in);
      const auto scaled = apply_scaler(model.scaler, file.records);
      const auto windows = build_all_windows(scaled, model.spec.timesteps, model.schema);
      std::vector<PredictionRow> rows;
      for (const auto& w : windows.windows) {
        rows.push_back({w.district, w.target_month, model.scaler.unscale(Feature::Cases, w.target),
                        predict(model, w.features)});
      }
      csv::write_file(dir / "reports" / "predictions.csv", predictions_csv(rows));
      out << "predicted " << rows.size() << " windows\n";
      return kOk;
    };
  });

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "train a grid of configurations over several seeds");
  ModelFlags sweep_flags;
  sweep_flags.attach(sweep_cmd);
  std::string sweep_file, sweep_kind = "timestep", grid, seeds_text, sweep_in;
  double sweep_ratio = 0.85;
  sweep_cmd->add_option("--sweep", sweep_file, "sweep spec JSON (overrides --kind/--grid/--seeds)");
  sweep_cmd->add_option("--kind", sweep_kind, "variant, timestep, predictor or architecture")->capture_default_str();
  sweep_cmd->add_option("--grid", grid, "timestep: comma list of t; architecture: comma list of names");
  sweep_cmd->add_option("--seeds", seeds_text, "comma list of seeds (default --seed)");
  sweep_cmd->add_option("--records", sweep_in, "input records (default <out>/imputed.csv or records.csv)");
  sweep_cmd->add_option("--split_ratio", sweep_ratio)->capture_default_str();
  sweep_cmd->callback([&] {
    action = [&] {
      const fs::path dir = g.out;
      SweepSpec sweep;
      if (!sweep_file.empty()) {
        require_file(sweep_file);
        sweep = sweep_from_json(read_text(sweep_file));
      } else {
        const ModelSpec base = sweep_flags.resolve(g, app);
        std::vector<std::uint64_t> seeds;
        for (const auto& s : ModelFlags::split_list(seeds_text))
          seeds.push_back(csv::parse_uint(s, "--seeds"));
        if (seeds.empty()) seeds.push_back(g.seed);
        const auto items = ModelFlags::split_list(grid);
        switch (parse_sweep_kind(sweep_kind)) {
          case SweepKind::Timestep: {
            std::vector<std::size_t> steps;
            for (const auto& s : items) steps.push_back(static_cast<std::size_t>(csv::parse_int(s, "--grid")));
            sweep = steps.empty() ? timestep_sweep(base, seeds) : timestep_sweep(base, seeds, steps);
            break;
          }
          case SweepKind::Architecture:
            sweep = architecture_sweep(base, seeds);
            if (!items.empty()) {
              std::vector<SpecDelta> cells;
              for (const auto& name : items) {
                const auto a = parse_architecture(name);
                cells.push_back(*std::find_if(sweep.grid.begin(), sweep.grid.end(),
                                              [&](const SpecDelta& d) { return d.arch == a; }));
              }
              sweep.grid = cells;
            }
            break;
          case SweepKind::Predictor:
          case SweepKind::Variant:
            if (!items.empty()) throw Error(ErrorKind::Validation, "--grid applies to timestep and architecture sweeps");
            sweep = sweep_kind == "predictor" ? predictor_sweep(base, seeds) : variant_sweep(base, seeds);
            break;
        }
        sweep.split_ratio = sweep_ratio;
      }
      sweep.validate();
      // Variant sweeps need larval values, so they read the imputed file.
      bool needs_larval = false;
      for (const auto& cell : sweep.grid) needs_larval |= cell.apply(sweep.base).variant == Variant::II;
      const fs::path in = !sweep_in.empty() ? fs::path(sweep_in)
                                            : default_records(dir, needs_larval ? Variant::II : Variant::I);
      require_file(in);
      const auto file = io::read_records(in);

      const auto result = run_sweep(sweep, file.records, {g.jobs, true});
      std::string log;
      for (std::size_t i = 0; i < result.reports.size(); ++i) {
        const auto& r = result.reports[i];
        log += r.label + " seed=" + std::to_string(r.seed) + " " + (r.ok() ? mse_line(r) : "failed: " + r.error) + "\n";
        if (g.verbose) err << r.label << " seed=" << r.seed << " wall_clock_s=" << r.wall_clock_s << "\n";
        if (!r.ok()) continue;
        csv::write_file(dir / "reports" / ("pred_" + run_stem(r) + ".csv"), predictions_csv(r.predictions));
        save_model(*result.models[i], dir / "models" / (run_stem(r) + ".bin"), dir / "models" / (run_stem(r) + ".json"));
      }
      if (result.argmin) log += "argmin " + result.rows[*result.argmin].label + "\n";
      csv::write_file(dir / "log.txt", log);
      csv::write_file(dir / "reports" / "summary.csv", summary_csv(result.kind, result.rows));
      csv::write_file(dir / "reports" / "runs.csv", runs_csv(result.reports));
      write_tables(dir, result.reports, result.kind, out);

      std::size_t failed = 0;
      std::optional<ErrorKind> first_failure;
      for (const auto& r : result.reports) {
        if (r.ok()) continue;
        ++failed;
        if (!first_failure) first_failure = r.failure;
      }
      if (failed == result.reports.size()) {
        err << "every run failed: " << result.reports.front().error << "\n";
        return exit_code(*first_failure);
      }
      return kOk;
    };
  });

  // report
  auto* report_cmd = app.add_subcommand("report", "re-render tables from a sweep's run directory");
  std::string run_dir;
  report_cmd->add_option("--run", run_dir, "run directory (default --out)");
  report_cmd->callback([&] {
    action = [&] {
      const fs::path dir = run_dir.empty() ? fs::path(g.out) : fs::path(run_dir);
      const fs::path summary = dir / "reports" / "summary.csv";
      const fs::path runs = dir / "reports" / "runs.csv";
      if (!fs::is_regular_file(summary) || !fs::is_regular_file(runs)) {
        throw Error(ErrorKind::EmptyInput, "no sweep reports under " + dir.string());
      }
      const auto kind = parse_summary_csv(read_text(summary)).kind;
      auto reports = parse_runs_csv(read_text(runs));
      if (reports.empty()) throw Error(ErrorKind::EmptyInput, runs.string() + " lists no runs");
      for (auto& r : reports) {
        const fs::path pred = dir / "reports" / ("pred_" + run_stem(r) + ".csv");
        if (r.ok() && fs::is_regular_file(pred)) r.predictions = parse_predictions_csv(read_text(pred));
      }
      write_tables(dir, reports, kind, out);
      return kOk;
    };
  });

  for (auto* sub : app.get_subcommands({}))
    sub->footer("Global options (before or after the subcommand): --seed, --out, --jobs, --config, -v");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInputError;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code(e.kind());
  }

  try {
    return action ? action() : kInputError;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace dengue::cli
