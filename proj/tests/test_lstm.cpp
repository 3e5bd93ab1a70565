#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dengue/error.hpp"
#include "dengue/lstm.hpp"
#include "dengue/rng.hpp"

using namespace dengue;
namespace fs = std::filesystem;

namespace {

Matrix random_window(std::size_t t, std::size_t f, Rng& rng) {
  Matrix m(t, f);
  for (auto& v : m.data()) v = rng.uniform(0, 1);
  return m;
}

ModelSpec small_spec(Architecture arch) {
  ModelSpec s;
  s.arch = arch;
  s.num_layers = 2;
  s.hidden = 4;
  s.timesteps = 3;
  s.dropout = 0.0;
  s.seed = 7;
  return s;
}

const Architecture kAll[] = {Architecture::Plain, Architecture::Stacked, Architecture::Bidirectional,
                             Architecture::BidirectionalStacked};

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

SplitDataset toy_split(std::size_t n, std::uint64_t seed) {
  // Target is a smooth function of the window, learnable in a few epochs.
  Rng rng(seed);
  SplitDataset split;
  for (std::size_t i = 0; i < n; ++i) {
    SupervisedWindow w;
    w.features = random_window(3, 4, rng);
    w.target = 0.5 * w.features(0, 0) + 0.3 * w.features(2, 1);
    w.district = "A";
    w.target_month = YearMonth::from_ordinal(24000 + static_cast<int>(i));
    (i < n * 3 / 4 ? split.train : split.test).push_back(std::move(w));
  }
  return split;
}

}  // namespace

TEST_CASE("one cell step matches the gate equations written out by hand") {
  Rng rng(3);
  const auto p = LstmCellParams::initialized(3, 2, rng);
  const std::vector<double> x = {0.2, -0.4, 0.9}, h0 = {0.1, -0.3}, c0 = {0.5, 0.2};
  const auto out = cell_forward(p, x, h0, c0);
  for (std::size_t j = 0; j < 2; ++j) {
    double z[4];
    for (std::size_t g = 0; g < 4; ++g) {
      const std::size_t row = g * 2 + j;
      z[g] = p.b(row, 0);
      for (std::size_t k = 0; k < 3; ++k) z[g] += p.W(row, k) * x[k];
      for (std::size_t k = 0; k < 2; ++k) z[g] += p.U(row, k) * h0[k];
    }
    const double c = sig(z[1]) * c0[j] + sig(z[0]) * std::tanh(z[2]);
    const double h = sig(z[3]) * std::tanh(c);
    CHECK(out.c[j] == doctest::Approx(c).epsilon(1e-14));
    CHECK(out.h[j] == doctest::Approx(h).epsilon(1e-14));
  }
}

TEST_CASE("initialization: forget bias 1, weights within the fan-in bound") {
  Rng rng(1);
  const auto p = LstmCellParams::initialized(5, 4, rng);
  CHECK(p.W.rows() == 16);
  CHECK(p.W.cols() == 5);
  CHECK(p.U.rows() == 16);
  CHECK(p.U.cols() == 4);
  const auto fb = p.gate_rows(p.b, Gate::Forget);
  for (double v : fb.data()) CHECK(v == 1.0);
  const auto ib = p.gate_rows(p.b, Gate::Input);
  for (double v : ib.data()) CHECK(v == 0.0);
  for (double v : p.W.data()) CHECK(std::abs(v) <= std::sqrt(1.0 / 5.0));
}

TEST_CASE("backward direction equals the forward pass over reversed rows") {
  Rng rng(5);
  const auto p = LstmCellParams::initialized(3, 4, rng);
  const auto x = random_window(5, 3, rng);
  Matrix rev(5, 3);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) rev(r, c) = x(4 - r, c);
  const auto bwd = sequence_forward(p, x, Direction::Backward);
  const auto fwd_rev = sequence_forward(p, rev, Direction::Forward);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(bwd(r, c) == doctest::Approx(fwd_rev(4 - r, c)).epsilon(1e-15));
}

TEST_CASE("parameter counts follow the closed form") {
  for (auto arch : kAll) {
    for (std::size_t f : {4u, 5u}) {
      auto spec = small_spec(arch);
      spec.hidden = 6;
      const LstmModel model(spec, f);
      std::size_t counted = 0;
      for (const auto& p : model.parameters()) counted += p.value.size();
      const std::size_t H = 6, d = spec.bidirectional() ? 2 : 1, L = spec.stacked() ? 2 : 1;
      std::size_t expect = d * 4 * (H * f + H * H + H);
      if (L == 2) expect += d * 4 * (H * d * H + H * H + H);
      expect += H * d * H + H + H + 1;
      CHECK(counted == expect);
      CHECK(model.parameter_count() == expect);
      CHECK(expected_parameter_count(spec, f) == expect);
    }
  }
  auto plain = small_spec(Architecture::Plain);
  plain.num_layers = 4;
  CHECK(LstmModel(plain, 4).parameter_count() == expected_parameter_count(small_spec(Architecture::Plain), 4));
}

TEST_CASE("BPTT gradients agree with central differences for every architecture") {
  for (auto arch : kAll) {
    CAPTURE(architecture_name(arch));
    for (double rate : {0.0, 0.3}) {
      auto spec = small_spec(arch);
      spec.dropout = rate;
      LstmModel model(spec, 5);
      Rng rng(11);
      std::vector<Matrix> xs = {random_window(3, 5, rng), random_window(3, 5, rng)};
      const std::vector<double> ys = {0.3, 0.8};
      const double lambda = 1e-3;
      LstmModel::ForwardCache cache;
      auto loss = [&] {
        Rng drop(99);
        double s = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          const double e = model.forward(xs[i], &cache, rate > 0 ? &drop : nullptr) - ys[i];
          s += e * e;
        }
        return s + l2_value(model.parameters(), lambda);
      };
      auto grad = [&] {
        model.zero_grad();
        Rng drop(99);
        for (std::size_t i = 0; i < xs.size(); ++i) {
          const double e = model.forward(xs[i], &cache, rate > 0 ? &drop : nullptr) - ys[i];
          model.backward(cache, 2 * e);
        }
        l2_penalty(model.parameters(), lambda);
      };
      if (rate == 0.0) {
        CHECK(grad_check(loss, grad, model.parameters(), {1e-5, 0, 1}) < 1e-4);
        continue;
      }
      // Dropped units leave some coordinates with gradients near 1e-9, below
      // the ~1e-11 roundoff of a central difference at eps 1e-5, so allow an
      // absolute floor alongside the relative bound.
      grad();
      for (auto& p : model.parameters()) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
          double& w = p.value.data()[i];
          const double saved = w;
          w = saved + 1e-5;
          const double plus = loss();
          w = saved - 1e-5;
          const double minus = loss();
          w = saved;
          const double numeric = (plus - minus) / 2e-5;
          const double analytic = p.grad.data()[i];
          CHECK(std::abs(analytic - numeric) <= 1e-4 * std::max(std::abs(analytic), std::abs(numeric)) + 1e-9);
        }
      }
    }
  }
}

TEST_CASE("backward rejects a cache from a different model shape") {
  LstmModel a(small_spec(Architecture::Plain), 5);
  LstmModel b(small_spec(Architecture::Plain), 4);
  Rng rng(2);
  LstmModel::ForwardCache cache;
  a.forward(random_window(3, 5, rng), &cache);
  try {
    b.backward(cache, 1.0);
    FAIL("expected StaleCache");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StaleCache);
  }
}

TEST_CASE("spec validation and parsing") {
  auto s = small_spec(Architecture::Stacked);
  s.num_layers = 1;
  CHECK_THROWS_AS(s.validate(), Error);
  try {
    parse_architecture("transformer");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Spec);
  }
  for (auto a : kAll) CHECK(parse_architecture(architecture_name(a)) == a);
  auto d = small_spec(Architecture::Plain);
  d.dropout = 1.0;
  CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("spec JSON round trip") {
  auto s = small_spec(Architecture::BidirectionalStacked);
  s.predictors = {Feature::Rainfall};
  s.variant = Variant::I;
  s.learning_rate = 0.0123;
  s.seed = 18446744073709551615ULL;
  CHECK(spec_from_json(spec_to_json(s)) == s);
  CHECK_THROWS_AS(spec_from_json(R"({"hiddden": 3})"), Error);
  CHECK_THROWS_AS(spec_from_json("{"), Error);
}

TEST_CASE("training is deterministic, keeps the best-validation snapshot and learns") {
  const auto split = toy_split(160, 4);
  auto spec = small_spec(Architecture::Plain);
  spec.epochs = 60;
  spec.learning_rate = 0.02;
  spec.dropout = 0.1;
  const auto a = train(spec, split, 0.2);
  const auto b = train(spec, split, 0.2);
  CHECK(a.loss_history == b.loss_history);
  for (std::size_t i = 0; i < a.model.parameters().size(); ++i)
    CHECK(a.model.parameters()[i].value == b.model.parameters()[i].value);
  REQUIRE(a.loss_history.size() == 60);

  double best = 1e300;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < a.loss_history.size(); ++i) {
    if (a.loss_history[i].validation_mse < best) {
      best = a.loss_history[i].validation_mse;
      arg = i + 1;
    }
  }
  CHECK(a.best_epoch == arg);
  // Recomputing validation MSE with the kept parameters reproduces the record.
  const std::size_t n_val = 24;  // floor(0.2 * 120)
  double s = 0;
  for (std::size_t i = split.train.size() - n_val; i < split.train.size(); ++i) {
    const double e = predict_scaled(a, split.train[i].features) - split.train[i].target;
    s += e * e;
  }
  CHECK(s / n_val == doctest::Approx(best).epsilon(1e-12));
  CHECK(a.loss_history.back().train_mse < a.loss_history.front().train_mse);

  auto other = spec;
  other.seed = 8;
  CHECK_FALSE(train(other, split, 0.2).loss_history == a.loss_history);
}

TEST_CASE("a non-finite loss raises DivergenceError with the epoch") {
  auto split = toy_split(20, 1);
  for (auto& w : split.train) w.target = 1e300;
  auto spec = small_spec(Architecture::Plain);
  spec.epochs = 5;
  try {
    train(spec, split, 0.0);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() == 1);
    CHECK(e.kind() == ErrorKind::Divergence);
  }
}

TEST_CASE("prediction checks window shape, de-scales and does not clamp") {
  const auto split = toy_split(40, 2);
  auto spec = small_spec(Architecture::Plain);
  spec.epochs = 3;
  Scaler scaler({{Feature::Cases, -50.0, 150.0}});
  const auto model = train(spec, split, 0.0, scaler);
  Rng rng(1);
  const auto w = random_window(3, 4, rng);
  CHECK(predict(model, w) == doctest::Approx(-50.0 + 200.0 * predict_scaled(model, w)));
  try {
    predict(model, random_window(4, 4, rng));
    FAIL("expected SpecError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Spec);
  }
  // Inference never consumes dropout randomness.
  CHECK(predict_scaled(model, w) == predict_scaled(model, w));
}

TEST_CASE("saved models reload bit-exactly and reruns write identical bytes") {
  const auto dir = fs::temp_directory_path() / "dengue_test_lstm";
  fs::remove_all(dir);
  const auto split = toy_split(40, 3);
  auto spec = small_spec(Architecture::BidirectionalStacked);
  spec.epochs = 4;
  Scaler scaler({{Feature::Cases, 0.0, 10.0}});
  const auto model = train(spec, split, 0.25, scaler);
  save_model(model, dir / "m.bin", dir / "m.json");
  const auto back = load_model(dir / "m.bin", dir / "m.json");
  CHECK(back.spec == model.spec);
  CHECK(back.scaler == model.scaler);
  for (const auto& w : split.test) CHECK(predict(back, w.features) == predict(model, w.features));

  const auto again = train(spec, split, 0.25, scaler);
  save_model(again, dir / "n.bin", dir / "n.json");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  CHECK(slurp(dir / "m.bin") == slurp(dir / "n.bin"));
  CHECK(slurp(dir / "m.json") == slurp(dir / "n.json"));

  const auto csv = loss_history_csv(model.loss_history);
  CHECK(csv.rfind("epoch,train_mse,validation_mse\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
