#include "dengue/lstm.hpp"

#include <algorithm>
#include <cmath>

#include "dengue/error.hpp"

namespace dengue {

std::string architecture_name(Architecture arch) {
  switch (arch) {
    case Architecture::Plain: return "plain";
    case Architecture::Stacked: return "stacked";
    case Architecture::Bidirectional: return "bidir";
    case Architecture::BidirectionalStacked: return "bidir_stacked";
  }
  return "?";
}

std::string architecture_label(Architecture arch) {
  switch (arch) {
    case Architecture::Plain: return "LSTM";
    case Architecture::Stacked: return "Stacked LSTM";
    case Architecture::Bidirectional: return "Bidirectional LSTM";
    case Architecture::BidirectionalStacked: return "Bidirectional Stacked LSTM";
  }
  return "?";
}

Architecture parse_architecture(const std::string& name) {
  for (auto a : {Architecture::Plain, Architecture::Stacked, Architecture::Bidirectional,
                 Architecture::BidirectionalStacked}) {
    if (architecture_name(a) == name) return a;
  }
  throw Error(ErrorKind::Spec, "unknown architecture '" + name + "' (plain, stacked, bidir, bidir_stacked)");
}

void ModelSpec::validate() const {
  if (stacked() && num_layers < 2) {
    throw Error(ErrorKind::Spec, architecture_name(arch) + " needs num_layers >= 2, got " + std::to_string(num_layers));
  }
  if (num_layers < 1) throw Error(ErrorKind::Spec, "num_layers must be >= 1");
  if (hidden < 1) throw Error(ErrorKind::Spec, "hidden must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::Spec, "dropout must lie in [0, 1)");
  if (epochs < 1) throw Error(ErrorKind::Spec, "epochs must be >= 1");
  if (!(l2_lambda >= 0.0)) throw Error(ErrorKind::Spec, "l2_lambda must be >= 0");
  if (timesteps < 2) throw Error(ErrorKind::Spec, "timesteps must be >= 2");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::Spec, "learning_rate must be > 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorKind::Spec, "validation_fraction must lie in [0, 1)");
  }
  if (predictors.empty()) throw Error(ErrorKind::Spec, "at least one climate predictor is required");
  for (Feature f : predictors) {
    if (f == Feature::Larval || f == Feature::Cases) {
      throw Error(ErrorKind::Spec, "'" + feature_name(f) + "' cannot be a climate predictor");
    }
  }
}

// ---------------------------------------------------------------------------
// Cell

LstmCellParams LstmCellParams::zeros(std::size_t input, std::size_t hidden) {
  return {Matrix(4 * hidden, input), Matrix(4 * hidden, hidden), Matrix(4 * hidden, 1)};
}

LstmCellParams LstmCellParams::initialized(std::size_t input, std::size_t hidden, Rng& rng) {
  auto p = zeros(input, hidden);
  const double w_bound = std::sqrt(1.0 / static_cast<double>(input));
  const double u_bound = std::sqrt(1.0 / static_cast<double>(hidden));
  for (double& w : p.W.data()) w = rng.uniform(-w_bound, w_bound);
  for (double& u : p.U.data()) u = rng.uniform(-u_bound, u_bound);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) p.b(j, 0) = 1.0;
  return p;
}

Matrix LstmCellParams::gate_rows(const Matrix& stacked, Gate gate) const {
  const std::size_t h = hidden();
  const std::size_t first = static_cast<std::size_t>(gate) * h;
  Matrix out(h, stacked.cols());
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < stacked.cols(); ++c) out(r, c) = stacked(first + r, c);
  return out;
}

CellView view_of(const LstmCellParams& p) { return {p.W.data(), p.U.data(), p.b.data(), p.input(), p.hidden()}; }

void cell_forward(const CellView& cell, std::span<const double> x, std::span<const double> h_prev,
                  std::span<const double> c_prev, std::span<double> h, std::span<double> c, CellCache& cache) {
  const std::size_t H = cell.hidden;
  if (x.size() != cell.input || h_prev.size() != H || c_prev.size() != H || h.size() != H || c.size() != H) {
    throw Error(ErrorKind::Shape, "cell_forward: input " + std::to_string(x.size()) + " (expects " +
                                      std::to_string(cell.input) + "), state " + std::to_string(h_prev.size()) +
                                      " (expects " + std::to_string(H) + ")");
  }
  cache.x.assign(x.begin(), x.end());
  cache.h_prev.assign(h_prev.begin(), h_prev.end());
  cache.c_prev.assign(c_prev.begin(), c_prev.end());
  auto& z = cache.gates;
  z.assign(cell.b.begin(), cell.b.end());
  gemv(cell.W, 4 * H, cell.input, x, z, true);
  gemv(cell.U, 4 * H, H, h_prev, z, true);

  double* gi = z.data();
  double* gf = gi + H;
  double* gg = gf + H;
  double* go = gg + H;
  cache.c.resize(H);
  cache.tanh_c.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    gi[j] = sigmoid(gi[j]);
    gf[j] = sigmoid(gf[j]);
    gg[j] = std::tanh(gg[j]);
    go[j] = sigmoid(go[j]);
    const double cj = gf[j] * c_prev[j] + gi[j] * gg[j];
    const double tc = std::tanh(cj);
    cache.c[j] = cj;
    cache.tanh_c[j] = tc;
    c[j] = cj;
    h[j] = go[j] * tc;
  }
}

void cell_backward(const CellView& cell, const CellCache& cache, std::span<const double> dh, std::span<const double> dc,
                   CellGrads grads, std::span<double> dx, std::span<double> dh_prev, std::span<double> dc_prev) {
  const std::size_t H = cell.hidden;
  const double* gi = cache.gates.data();
  const double* gf = gi + H;
  const double* gg = gf + H;
  const double* go = gg + H;

  // Gradient with respect to the gate pre-activations, reused by all three
  // parameter tensors.
  double dz_buf[256];
  std::vector<double> dz_heap;
  double* dz = dz_buf;
  if (4 * H > 256) {
    dz_heap.resize(4 * H);
    dz = dz_heap.data();
  }
  for (std::size_t j = 0; j < H; ++j) {
    const double tc = cache.tanh_c[j];
    const double d_o = dh[j] * tc;
    const double d_c = dc[j] + dh[j] * go[j] * (1.0 - tc * tc);
    const double d_i = d_c * gg[j];
    const double d_f = d_c * cache.c_prev[j];
    const double d_g = d_c * gi[j];
    dc_prev[j] = d_c * gf[j];
    dz[j] = d_i * gi[j] * (1.0 - gi[j]);
    dz[H + j] = d_f * gf[j] * (1.0 - gf[j]);
    dz[2 * H + j] = d_g * (1.0 - gg[j] * gg[j]);
    dz[3 * H + j] = d_o * go[j] * (1.0 - go[j]);
  }
  const std::span<const double> dz_span(dz, 4 * H);
  outer_add(grads.W, dz_span, cache.x);
  outer_add(grads.U, dz_span, cache.h_prev);
  for (std::size_t j = 0; j < 4 * H; ++j) grads.b[j] += dz[j];
  gemv_transposed_add(cell.W, 4 * H, cell.input, dz_span, dx);
  std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
  gemv_transposed_add(cell.U, 4 * H, H, dz_span, dh_prev);
}

CellState cell_forward(const LstmCellParams& params, std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, CellCache* cache) {
  CellState s{std::vector<double>(params.hidden()), std::vector<double>(params.hidden())};
  CellCache local;
  cell_forward(view_of(params), x, h_prev, c_prev, s.h, s.c, cache ? *cache : local);
  return s;
}

// ---------------------------------------------------------------------------
// Sequence

void sequence_forward(const CellView& cell, const Matrix& input, Direction direction, Matrix& out,
                      std::size_t col_offset, SequenceCache* cache) {
  const std::size_t t = input.rows();
  const std::size_t H = cell.hidden;
  if (input.cols() != cell.input) {
    throw Error(ErrorKind::Shape, "sequence_forward: window has " + std::to_string(input.cols()) +
                                      " columns, cell expects " + std::to_string(cell.input));
  }
  if (out.rows() != t || out.cols() < col_offset + H) {
    throw Error(ErrorKind::Shape, "sequence_forward: output buffer " + out.shape_string() + " too small");
  }
  SequenceCache local;
  SequenceCache& sc = cache ? *cache : local;
  sc.direction = direction;
  sc.steps = t;
  if (sc.cells.size() < t) sc.cells.resize(t);

  std::vector<double> h(H, 0.0);
  std::vector<double> c(H, 0.0);
  std::vector<double> h_next(H);
  std::vector<double> c_next(H);
  for (std::size_t step = 0; step < t; ++step) {
    const std::size_t row = direction == Direction::Forward ? step : t - 1 - step;
    cell_forward(cell, input.row(row), h, c, h_next, c_next, sc.cells[row]);
    std::swap(h, h_next);
    std::swap(c, c_next);
    std::copy(h.begin(), h.end(), out.row(row).begin() + static_cast<std::ptrdiff_t>(col_offset));
  }
}

Matrix sequence_forward(const LstmCellParams& params, const Matrix& input, Direction direction, SequenceCache* cache) {
  Matrix out(input.rows(), params.hidden());
  sequence_forward(view_of(params), input, direction, out, 0, cache);
  return out;
}

void sequence_backward(const CellView& cell, const SequenceCache& cache, const Matrix& d_out, std::size_t col_offset,
                       CellGrads grads, Matrix& d_input) {
  const std::size_t t = cache.steps;
  const std::size_t H = cell.hidden;
  if (d_out.rows() != t || d_input.rows() != t || d_input.cols() != cell.input || cache.cells.size() < t) {
    throw Error(ErrorKind::StaleCache, "sequence_backward: cache holds " + std::to_string(t) + " steps, gradient is " +
                                           d_out.shape_string());
  }
  std::vector<double> dh(H);
  std::vector<double> dh_next(H, 0.0);
  std::vector<double> dc_next(H, 0.0);
  std::vector<double> dh_prev(H);
  std::vector<double> dc_prev(H);
  for (std::size_t step = t; step-- > 0;) {
    const std::size_t row = cache.direction == Direction::Forward ? step : t - 1 - step;
    const auto g = d_out.row(row);
    for (std::size_t j = 0; j < H; ++j) dh[j] = g[col_offset + j] + dh_next[j];
    cell_backward(cell, cache.cells[row], dh, dc_next, grads, d_input.row(row), dh_prev, dc_prev);
    std::swap(dh_next, dh_prev);
    std::swap(dc_next, dc_prev);
  }
}

// ---------------------------------------------------------------------------
// Model

LstmModel::LstmModel(ModelSpec spec, std::size_t n_features) : spec_(std::move(spec)), n_features_(n_features) {
  spec_.validate();
  if (n_features_ < 1) throw Error(ErrorKind::Spec, "model needs at least one input feature");
  Rng rng(derive_seed(spec_.seed, "init"));
  const std::size_t H = spec_.hidden;

  auto add_cell = [&](const std::string& prefix, std::size_t input) {
    auto p = LstmCellParams::initialized(input, H, rng);
    CellSlots s;
    s.input = input;
    s.W = params_.size();
    params_.emplace_back(prefix + ".W", std::move(p.W));
    s.U = params_.size();
    params_.emplace_back(prefix + ".U", std::move(p.U));
    s.b = params_.size();
    params_.emplace_back(prefix + ".b", std::move(p.b), false);
    return s;
  };

  std::size_t input = n_features_;
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    forward_cells_.push_back(add_cell(prefix + ".fwd", input));
    if (spec_.bidirectional()) backward_cells_.push_back(add_cell(prefix + ".bwd", input));
    input = feature_width();
  }

  const std::size_t D = feature_width();
  Matrix head_W(H, D);
  const double head_bound = std::sqrt(1.0 / static_cast<double>(D));
  for (double& w : head_W.data()) w = rng.uniform(-head_bound, head_bound);
  Matrix out_W(1, H);
  const double out_bound = std::sqrt(1.0 / static_cast<double>(H));
  for (double& w : out_W.data()) w = rng.uniform(-out_bound, out_bound);

  head_W_ = params_.size();
  params_.emplace_back("head.W", std::move(head_W));
  head_b_ = params_.size();
  params_.emplace_back("head.b", Matrix(H, 1), false);
  out_W_ = params_.size();
  params_.emplace_back("out.W", std::move(out_W));
  out_b_ = params_.size();
  params_.emplace_back("out.b", Matrix(1, 1), false);
}

std::size_t LstmModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::size_t expected_parameter_count(const ModelSpec& spec, std::size_t n_features) {
  const std::size_t H = spec.hidden;
  const std::size_t dirs = spec.bidirectional() ? 2 : 1;
  std::size_t total = 0;
  std::size_t input = n_features;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    total += dirs * 4 * (H * input + H * H + H);
    input = dirs * H;
  }
  return total + (H * dirs * H + H) + (H + 1);
}

CellView LstmModel::cell_view(const CellSlots& s) const {
  return {params_[s.W].value.data(), params_[s.U].value.data(), params_[s.b].value.data(), s.input, spec_.hidden};
}

CellGrads LstmModel::cell_grads(const CellSlots& s) {
  return {params_[s.W].grad.data(), params_[s.U].grad.data(), params_[s.b].grad.data()};
}

CellView LstmModel::cell(std::size_t layer, Direction direction) const {
  if (direction == Direction::Backward) {
    if (!spec_.bidirectional()) throw Error(ErrorKind::Spec, "unidirectional model has no backward cell");
    return cell_view(backward_cells_.at(layer));
  }
  return cell_view(forward_cells_.at(layer));
}

void LstmModel::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double LstmModel::forward(const Matrix& window, ForwardCache* cache, Rng* dropout_rng) const {
  if (window.cols() != n_features_) {
    throw Error(ErrorKind::Shape, "window has " + std::to_string(window.cols()) + " features, model expects " +
                                      std::to_string(n_features_));
  }
  if (window.rows() < 1) throw Error(ErrorKind::Shape, "empty window");

  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;
  const std::size_t t = window.rows();
  const std::size_t H = spec_.hidden;
  const std::size_t D = feature_width();
  const std::size_t L = spec_.layer_count();
  const bool drop = dropout_rng != nullptr && spec_.dropout > 0.0;

  fc.n_features = n_features_;
  fc.steps = t;
  fc.layer_inputs.resize(L);
  fc.layers.resize(L);
  fc.layer_inputs[0] = window;

  for (std::size_t l = 0; l < L; ++l) {
    auto& lc = fc.layers[l];
    if (lc.output.rows() != t || lc.output.cols() != D) lc.output = Matrix(t, D);
    sequence_forward(cell_view(forward_cells_[l]), fc.layer_inputs[l], Direction::Forward, lc.output, 0, &lc.forward);
    if (spec_.bidirectional()) {
      sequence_forward(cell_view(backward_cells_[l]), fc.layer_inputs[l], Direction::Backward, lc.output, H,
                       &lc.backward);
    }
    if (l + 1 < L) {
      Matrix next = lc.output;
      if (drop) {
        if (!lc.dropout_mask.same_shape(next)) lc.dropout_mask = Matrix(t, D);
        dropout_mask(lc.dropout_mask.data(), spec_.dropout, *dropout_rng);
        auto nd = next.data();
        auto md = lc.dropout_mask.data();
        for (std::size_t i = 0; i < nd.size(); ++i) nd[i] *= md[i];
      } else {
        lc.dropout_mask = Matrix();
      }
      fc.layer_inputs[l + 1] = std::move(next);
    } else {
      lc.dropout_mask = Matrix();
    }
  }

  // Forward direction ends at the last row, backward direction at row 0.
  const Matrix& top = fc.layers[L - 1].output;
  fc.head_input.resize(D);
  for (std::size_t j = 0; j < H; ++j) fc.head_input[j] = top(t - 1, j);
  if (spec_.bidirectional())
    for (std::size_t j = 0; j < H; ++j) fc.head_input[H + j] = top(0, H + j);
  if (drop) {
    fc.head_mask.resize(D);
    dropout_mask(fc.head_mask, spec_.dropout, *dropout_rng);
    for (std::size_t j = 0; j < D; ++j) fc.head_input[j] *= fc.head_mask[j];
  } else {
    fc.head_mask.clear();
  }

  fc.head_pre.assign(params_[head_b_].value.data().begin(), params_[head_b_].value.data().end());
  gemv(params_[head_W_].value.data(), H, D, fc.head_input, fc.head_pre, true);
  fc.head_act.resize(H);
  double y = params_[out_b_].value(0, 0);
  const auto wo = params_[out_W_].value.data();
  for (std::size_t j = 0; j < H; ++j) {
    fc.head_act[j] = relu(fc.head_pre[j]);
    y += wo[j] * fc.head_act[j];
  }
  fc.prediction = y;
  return y;
}

void LstmModel::backward(const ForwardCache& fc, double d_prediction) {
  const std::size_t H = spec_.hidden;
  const std::size_t D = feature_width();
  const std::size_t L = spec_.layer_count();
  const std::size_t t = fc.steps;
  if (fc.n_features != n_features_ || fc.layers.size() != L || fc.head_input.size() != D || t == 0 ||
      fc.layers[L - 1].output.rows() != t || fc.layers[L - 1].output.cols() != D) {
    throw Error(ErrorKind::StaleCache, "forward cache does not match this model");
  }

  // Output and dense head.
  params_[out_b_].grad(0, 0) += d_prediction;
  auto d_out_W = params_[out_W_].grad.data();
  const auto wo = params_[out_W_].value.data();
  std::vector<double> d_pre(H);
  for (std::size_t j = 0; j < H; ++j) {
    d_out_W[j] += d_prediction * fc.head_act[j];
    d_pre[j] = d_prediction * wo[j] * relu_grad(fc.head_pre[j]);
  }
  outer_add(params_[head_W_].grad.data(), d_pre, fc.head_input);
  auto d_head_b = params_[head_b_].grad.data();
  for (std::size_t j = 0; j < H; ++j) d_head_b[j] += d_pre[j];
  std::vector<double> d_feat(D, 0.0);
  gemv_transposed_add(params_[head_W_].value.data(), H, D, d_pre, d_feat);
  if (!fc.head_mask.empty())
    for (std::size_t j = 0; j < D; ++j) d_feat[j] *= fc.head_mask[j];

  Matrix d_out(t, D);
  for (std::size_t j = 0; j < H; ++j) d_out(t - 1, j) = d_feat[j];
  if (spec_.bidirectional())
    for (std::size_t j = 0; j < H; ++j) d_out(0, H + j) = d_feat[H + j];

  for (std::size_t l = L; l-- > 0;) {
    const auto& lc = fc.layers[l];
    const auto& fs = forward_cells_[l];
    Matrix d_in(t, fs.input);
    sequence_backward(cell_view(fs), lc.forward, d_out, 0, cell_grads(fs), d_in);
    if (spec_.bidirectional()) {
      const auto& bs = backward_cells_[l];
      sequence_backward(cell_view(bs), lc.backward, d_out, H, cell_grads(bs), d_in);
    }
    if (l == 0) break;
    const auto& below = fc.layers[l - 1];
    if (!below.dropout_mask.empty()) {
      auto dd = d_in.data();
      auto md = below.dropout_mask.data();
      for (std::size_t i = 0; i < dd.size(); ++i) dd[i] *= md[i];
    }
    d_out = std::move(d_in);
  }
}

}  // namespace dengue
