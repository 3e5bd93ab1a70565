#include <cmath>
#include <limits>

#include "dengue/error.hpp"
#include "dengue/lstm.hpp"

namespace dengue {

namespace {

double evaluate_mse(const LstmModel& model, std::span<const SupervisedWindow> windows, LstmModel::ForwardCache& cache) {
  double sum = 0.0;
  for (const auto& w : windows) {
    const double err = model.forward(w.features, &cache) - w.target;
    sum += err * err;
  }
  return sum / static_cast<double>(windows.size());
}

}  // namespace

TrainedModel train(const ModelSpec& spec, const SplitDataset& split, double validation_fraction, const Scaler& scaler,
                   const WindowSchema& schema) {
  spec.validate();
  if (split.train.empty()) throw Error(ErrorKind::EmptyTrain, "training split is empty");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorKind::Validation, "validation_fraction must lie in [0, 1)");
  }
  const std::size_t n_features = split.train.front().features.cols();
  for (const auto& w : split.train) {
    if (w.features.cols() != n_features) throw Error(ErrorKind::Shape, "training windows disagree on feature count");
  }

  const std::size_t n = split.train.size();
  std::size_t n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(n)));
  if (n_val >= n) n_val = 0;
  const std::span<const SupervisedWindow> all(split.train);
  const auto fit_set = all.first(n - n_val);
  const auto val_set = n_val > 0 ? all.last(n_val) : fit_set;

  TrainedModel out{spec, LstmModel(spec, n_features), schema, scaler, {}, 0};
  LstmModel& model = out.model;
  auto params = model.parameters();

  Adam adam({spec.learning_rate, 0.9, 0.999, 1e-8});
  Sgd sgd(spec.learning_rate);
  Rng dropout_rng(derive_seed(spec.seed, "dropout"));

  std::vector<Matrix> best;
  double best_val = std::numeric_limits<double>::infinity();
  LstmModel::ForwardCache cache;
  const double scale = 2.0 / static_cast<double>(fit_set.size());
  out.loss_history.reserve(spec.epochs);

  for (std::size_t epoch = 1; epoch <= spec.epochs; ++epoch) {
    model.zero_grad();
    double sum_sq = 0.0;
    for (const auto& w : fit_set) {
      const double err = model.forward(w.features, &cache, &dropout_rng) - w.target;
      sum_sq += err * err;
      model.backward(cache, scale * err);
    }
    const double train_mse = sum_sq / static_cast<double>(fit_set.size());
    const double penalty = l2_penalty(params, spec.l2_lambda);
    if (!std::isfinite(train_mse + penalty)) throw DivergenceError(epoch, "training loss is not finite");

    const double val_mse = evaluate_mse(model, val_set, cache);
    if (!std::isfinite(val_mse)) throw DivergenceError(epoch, "validation loss is not finite");
    out.loss_history.push_back({train_mse, val_mse});
    if (val_mse < best_val) {
      best_val = val_mse;
      out.best_epoch = epoch;
      best.clear();
      for (const auto& p : params) best.push_back(p.value);
    }

    if (spec.optimizer == OptimizerKind::Adam) {
      adam.step(params, epoch);
    } else {
      sgd.step(params);
    }
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = std::move(best[i]);
  model.zero_grad();
  return out;
}

TrainedModel train(const ModelSpec& spec, const PreparedData& data) {
  if (data.timesteps != spec.timesteps || !(data.schema == spec.schema())) {
    throw Error(ErrorKind::Spec, "prepared windows do not match the model spec (timesteps or predictors differ)");
  }
  return train(spec, data.split, spec.validation_fraction, data.scaler, data.schema);
}

double predict_scaled(const TrainedModel& model, const Matrix& window) {
  if (window.cols() != model.model.n_features() || window.rows() != model.spec.timesteps) {
    throw Error(ErrorKind::Spec, "window is " + window.shape_string() + ", model expects " +
                                     std::to_string(model.spec.timesteps) + "x" +
                                     std::to_string(model.model.n_features()));
  }
  return model.model.forward(window);
}

double predict(const TrainedModel& model, const Matrix& window) {
  const double y = predict_scaled(model, window);
  if (model.scaler.fitted() && model.scaler.has(Feature::Cases)) return model.scaler.unscale(Feature::Cases, y);
  return y;
}

}  // namespace dengue
