#include <fstream>

#include "dengue/csv.hpp"
#include "dengue/error.hpp"
#include "dengue/lstm.hpp"
#include "dengue/snapshot.hpp"
#include "json.hpp"

namespace dengue {

namespace {

using nlohmann::json;

constexpr const char* kSidecarFormat = "dengue-lstm/1";

json spec_json(const ModelSpec& s) {
  json predictors = json::array();
  for (Feature f : s.predictors) predictors.push_back(feature_name(f));
  return json{
      {"arch", architecture_name(s.arch)},
      {"num_layers", s.num_layers},
      {"hidden", s.hidden},
      {"dropout", s.dropout},
      {"epochs", s.epochs},
      {"l2_lambda", s.l2_lambda},
      {"timesteps", s.timesteps},
      {"variant", variant_name(s.variant)},
      {"predictors", predictors},
      {"learning_rate", s.learning_rate},
      {"optimizer", s.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
      {"validation_fraction", s.validation_fraction},
      {"seed", s.seed},
  };
}

ModelSpec spec_from(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Validation, "model spec must be a JSON object");
  ModelSpec s;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "arch") s.arch = parse_architecture(value.get<std::string>());
      else if (key == "num_layers") s.num_layers = value.get<std::size_t>();
      else if (key == "hidden") s.hidden = value.get<std::size_t>();
      else if (key == "dropout") s.dropout = value.get<double>();
      else if (key == "epochs") s.epochs = value.get<std::size_t>();
      else if (key == "l2_lambda") s.l2_lambda = value.get<double>();
      else if (key == "timesteps") s.timesteps = value.get<std::size_t>();
      else if (key == "variant") s.variant = parse_variant(value.get<std::string>());
      else if (key == "predictors") {
        s.predictors.clear();
        for (const auto& p : value) s.predictors.push_back(parse_feature(p.get<std::string>()));
      } else if (key == "learning_rate") s.learning_rate = value.get<double>();
      else if (key == "optimizer") {
        const auto name = value.get<std::string>();
        if (name == "adam") s.optimizer = OptimizerKind::Adam;
        else if (name == "sgd") s.optimizer = OptimizerKind::Sgd;
        else throw Error(ErrorKind::Validation, "unknown optimizer '" + name + "'");
      } else if (key == "validation_fraction") s.validation_fraction = value.get<double>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else throw Error(ErrorKind::Validation, "unknown model spec field '" + key + "'");
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Validation, "model spec field '" + key + "': " + e.what());
    }
  }
  return s;
}

}  // namespace

std::string spec_to_json(const ModelSpec& spec) { return spec_json(spec).dump(2); }

ModelSpec spec_from_json(const std::string& text) {
  try {
    return spec_from(json::parse(text));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Validation, std::string("model spec JSON: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::filesystem::path& bin_path,
                const std::filesystem::path& json_path) {
  if (bin_path.has_parent_path()) std::filesystem::create_directories(bin_path.parent_path());
  {
    std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + bin_path.string());
    write_snapshot(out, model.model.parameters());
  }

  json climate = json::array();
  for (Feature f : model.schema.climate) climate.push_back(feature_name(f));
  json scaler = json::array();
  for (const auto& r : model.scaler.ranges()) {
    scaler.push_back({{"feature", feature_name(r.feature)}, {"min", r.min}, {"max", r.max}});
  }
  const json sidecar{
      {"format", kSidecarFormat},
      {"spec", spec_json(model.spec)},
      {"n_features", model.model.n_features()},
      {"schema", {{"climate", climate}, {"larval", model.schema.larval}}},
      {"scaler", scaler},
      {"best_epoch", model.best_epoch},
      {"epochs_run", model.loss_history.size()},
  };
  csv::write_file(json_path, sidecar.dump(2) + "\n");
}

TrainedModel load_model(const std::filesystem::path& bin_path, const std::filesystem::path& json_path) {
  std::ifstream jin(json_path);
  if (!jin) throw Error(ErrorKind::Io, "cannot open " + json_path.string());
  json sidecar;
  try {
    sidecar = json::parse(jin);
    if (sidecar.at("format").get<std::string>() != kSidecarFormat) {
      throw Error(ErrorKind::Validation, json_path.string() + ": unsupported sidecar format");
    }
    ModelSpec spec = spec_from(sidecar.at("spec"));
    const auto n_features = sidecar.at("n_features").get<std::size_t>();
    WindowSchema schema;
    schema.climate.clear();
    for (const auto& f : sidecar.at("schema").at("climate")) schema.climate.push_back(parse_feature(f.get<std::string>()));
    schema.larval = sidecar.at("schema").at("larval").get<bool>();
    std::vector<FeatureRange> ranges;
    for (const auto& r : sidecar.at("scaler")) {
      ranges.push_back({parse_feature(r.at("feature").get<std::string>()), r.at("min").get<double>(),
                        r.at("max").get<double>()});
    }
    TrainedModel model{spec, LstmModel(spec, n_features), schema, Scaler(std::move(ranges)), {},
                       sidecar.value("best_epoch", std::size_t{0})};

    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw Error(ErrorKind::Io, "cannot open " + bin_path.string());
    restore_snapshot(model.model.parameters(), read_snapshot(bin));
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Validation, json_path.string() + ": " + e.what());
  }
}

std::string loss_history_csv(const std::vector<EpochLoss>& history) {
  std::string out = "epoch,train_mse,validation_mse\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out += std::to_string(i + 1) + "," + csv::format_double(history[i].train_mse) + "," +
           csv::format_double(history[i].validation_mse) + "\n";
  }
  return out;
}

}  // namespace dengue
