#include "dengue/nn.hpp"

#include <algorithm>
#include <numeric>

#include "dengue/error.hpp"

namespace dengue {

namespace {

template <typename F>
Matrix map_elements(const Matrix& x, F f) {
  Matrix out(x.rows(), x.cols());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

}  // namespace

Matrix relu(const Matrix& x) { return map_elements(x, [](double v) { return relu(v); }); }
Matrix sigmoid(const Matrix& x) { return map_elements(x, [](double v) { return sigmoid(v); }); }
Matrix tanh_act(const Matrix& x) { return map_elements(x, [](double v) { return tanh_act(v); }); }

void validate_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrorKind::Validation, "dropout rate " + std::to_string(rate) + " outside [0, 1)");
  }
}

void dropout_mask(std::span<double> mask, double rate, Rng& rng) {
  if (rate == 0.0) {
    std::fill(mask.begin(), mask.end(), 1.0);
    return;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
}

DropoutResult dropout(const Matrix& x, double rate, Rng& rng, bool training) {
  validate_dropout_rate(rate);
  DropoutResult result{x, Matrix(x.rows(), x.cols(), 1.0)};
  if (!training) return result;
  dropout_mask(result.mask.data(), rate, rng);
  auto out = result.output.data();
  auto mask = result.mask.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return result;
}

double mse(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) {
    throw Error(ErrorKind::Shape,
                "mse: " + std::to_string(actual.size()) + " actual vs " + std::to_string(predicted.size()) + " predicted");
  }
  if (actual.empty()) throw Error(ErrorKind::EmptyInput, "mse of zero values");
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = actual[i] - predicted[i];
    sum += d * d;
  }
  return sum / static_cast<double>(actual.size());
}

double l2_value(std::span<const Parameter> params, double lambda) {
  if (lambda < 0.0) throw Error(ErrorKind::Validation, "negative L2 lambda");
  if (lambda == 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& p : params) {
    if (!p.regularized) continue;
    for (double w : p.value.data()) sum += w * w;
  }
  return lambda * sum;
}

double l2_penalty(std::span<Parameter> params, double lambda) {
  const double term = l2_value(params, lambda);
  if (lambda == 0.0) return 0.0;
  for (auto& p : params) {
    if (!p.regularized) continue;
    auto w = p.value.data();
    auto g = p.grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) g[i] += 2.0 * lambda * w[i];
  }
  return term;
}

void Adam::step(std::span<Parameter> params, std::size_t step) {
  if (step == 0) throw Error(ErrorKind::State, "Adam step count is 1-based");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.rows(), p.value.cols());
      v_.emplace_back(p.value.rows(), p.value.cols());
    }
  }
  if (m_.size() != params.size()) throw Error(ErrorKind::State, "Adam reused with a different parameter set");
  const double t = static_cast<double>(step);
  const double bias1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (!p.grad.same_shape(p.value) || !m_[k].same_shape(p.value)) {
      throw Error(ErrorKind::State, "gradient for '" + p.name + "' not populated (" + p.grad.shape_string() + " vs " +
                                        p.value.shape_string() + ")");
    }
    auto w = p.value.data();
    auto g = p.grad.data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      w[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

void Sgd::step(std::span<Parameter> params) {
  for (auto& p : params) {
    if (!p.grad.same_shape(p.value)) throw Error(ErrorKind::State, "gradient for '" + p.name + "' not populated");
    auto w = p.value.data();
    auto g = p.grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * g[i];
  }
}

double grad_check(const std::function<double()>& loss, const std::function<void()>& gradient,
                  std::span<Parameter> params, const GradCheckOptions& options) {
  gradient();

  struct Coord {
    std::size_t param;
    std::size_t index;
  };
  std::vector<Coord> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].value.size(); ++i) coords.push_back({p, i});

  if (options.max_coords != 0 && coords.size() > options.max_coords) {
    Rng rng(options.seed);
    // Partial Fisher-Yates: the first max_coords entries become the sample.
    for (std::size_t i = 0; i < options.max_coords; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(coords.size() - i));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(options.max_coords);
  }

  std::vector<double> analytic;
  analytic.reserve(coords.size());
  for (const auto& c : coords) analytic.push_back(params[c.param].grad.data()[c.index]);

  double worst = 0.0;
  for (std::size_t n = 0; n < coords.size(); ++n) {
    double& w = params[coords[n].param].value.data()[coords[n].index];
    const double saved = w;
    w = saved + options.eps;
    const double plus = loss();
    w = saved - options.eps;
    const double minus = loss();
    w = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw Error(ErrorKind::Numerical, "non-finite loss while perturbing '" + params[coords[n].param].name + "'");
    }
    const double numeric = (plus - minus) / (2.0 * options.eps);
    const double denom = std::max({std::abs(analytic[n]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[n] - numeric) / denom);
  }
  return worst;
}

}  // namespace dengue
