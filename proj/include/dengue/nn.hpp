#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dengue/matrix.hpp"
#include "dengue/rng.hpp"

namespace dengue {

// ---------------------------------------------------------------------------
// Activations

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double relu_grad(double x) { return x > 0.0 ? 1.0 : 0.0; }

/// Logistic function, evaluated through whichever branch keeps exp() from
/// overflowing.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline double sigmoid_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

inline double tanh_act(double x) { return std::tanh(x); }
inline double tanh_grad(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

Matrix relu(const Matrix& x);
Matrix sigmoid(const Matrix& x);
Matrix tanh_act(const Matrix& x);

// ---------------------------------------------------------------------------
// Dropout

struct DropoutResult {
  Matrix output;
  /// Per-entry multiplier: 0 for dropped entries, 1/(1-rate) for survivors.
  Matrix mask;
};

/// Inverted dropout. Inference (training == false) is the identity and
/// consumes no randomness.
DropoutResult dropout(const Matrix& x, double rate, Rng& rng, bool training);

/// Fills `mask` with inverted-dropout multipliers.
void dropout_mask(std::span<double> mask, double rate, Rng& rng);

void validate_dropout_rate(double rate);

// ---------------------------------------------------------------------------
// Loss

/// Mean squared error (1/N) * sum (actual_i - predicted_i)^2.
double mse(std::span<const double> actual, std::span<const double> predicted);

// ---------------------------------------------------------------------------
// Parameters, regularization and optimizers

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  /// Biases are excluded from the L2 penalty.
  bool regularized = true;

  Parameter() = default;
  Parameter(std::string n, Matrix v, bool reg = true)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()), regularized(reg) {}

  void zero_grad() { grad.fill(0.0); }
};

/// Adds lambda * sum(w^2) over regularized parameters and accumulates
/// 2 * lambda * w into their gradients. Returns the loss term.
double l2_penalty(std::span<Parameter> params, double lambda);

/// Loss term only, gradients untouched.
double l2_value(std::span<const Parameter> params, double lambda);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// One bias-corrected update; `step` is the 1-based update count.
  void step(std::span<Parameter> params, std::size_t step);

  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// Plain gradient descent, kept for optimizer ablations.
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(std::span<Parameter> params);

 private:
  double lr_;
};

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckOptions {
  double eps = 1e-5;
  /// Coordinates checked per run; 0 checks every coordinate.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

/// Compares the analytic gradient against central differences.
///
/// `loss` evaluates the scalar objective at the current parameter values.
/// `gradient` must zero and repopulate every Parameter::grad. Returns the
/// largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) seen.
double grad_check(const std::function<double()>& loss, const std::function<void()>& gradient,
                  std::span<Parameter> params, const GradCheckOptions& options = {});

}  // namespace dengue
