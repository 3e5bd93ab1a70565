#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dengue/dataprep.hpp"
#include "dengue/matrix.hpp"
#include "dengue/nn.hpp"
#include "dengue/rng.hpp"

namespace dengue {

enum class Architecture { Plain, Stacked, Bidirectional, BidirectionalStacked };

/// Short identifier used in configs and on the command line: plain, stacked,
/// bidir, bidir_stacked.
std::string architecture_name(Architecture arch);
/// Display label used in report tables, e.g. "Bidirectional Stacked LSTM".
std::string architecture_label(Architecture arch);
Architecture parse_architecture(const std::string& name);

enum class OptimizerKind { Adam, Sgd };

struct ModelSpec {
  Architecture arch = Architecture::Plain;
  /// Depth for the stacked architectures; plain and bidir always use 1.
  std::size_t num_layers = 4;
  std::size_t hidden = 32;
  double dropout = 0.2;
  std::size_t epochs = 3000;
  double l2_lambda = 1e-4;
  std::size_t timesteps = 3;
  Variant variant = Variant::II;
  std::vector<Feature> predictors = all_climate_features();
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  /// Trailing share of the training split held out for validation.
  double validation_fraction = 0.15;
  std::uint64_t seed = 42;

  bool bidirectional() const noexcept {
    return arch == Architecture::Bidirectional || arch == Architecture::BidirectionalStacked;
  }
  bool stacked() const noexcept { return arch == Architecture::Stacked || arch == Architecture::BidirectionalStacked; }
  /// Layers actually built.
  std::size_t layer_count() const noexcept { return stacked() ? num_layers : 1; }
  WindowSchema schema() const { return make_schema(variant, predictors); }

  /// Throws SpecError on an inconsistent spec (e.g. stacked with one layer).
  void validate() const;

  bool operator==(const ModelSpec&) const = default;
};

// ---------------------------------------------------------------------------
// LSTM cell
//
//   i = sigmoid(W_i x + U_i h + b_i)     f = sigmoid(W_f x + U_f h + b_f)
//   g = tanh(W_g x + U_g h + b_g)        o = sigmoid(W_o x + U_o h + b_o)
//   c' = f * c + i * g                   h' = o * tanh(c')
//
// The four gate blocks are stacked row-wise in the order i, f, g, o, so W is
// 4H x input, U is 4H x H and b is 4H x 1.

enum class Gate : std::size_t { Input = 0, Forget = 1, Cell = 2, Output = 3 };

struct LstmCellParams {
  Matrix W;
  Matrix U;
  Matrix b;

  std::size_t input() const noexcept { return W.cols(); }
  std::size_t hidden() const noexcept { return U.cols(); }

  static LstmCellParams zeros(std::size_t input, std::size_t hidden);
  /// Uniform in +-sqrt(1/fan_in); forget-gate bias 1, other biases 0.
  static LstmCellParams initialized(std::size_t input, std::size_t hidden, Rng& rng);

  /// Rows of one gate block, as a (hidden x cols) copy.
  Matrix gate_rows(const Matrix& stacked, Gate gate) const;
};

/// Read-only view of a cell's tensors, wherever they are stored.
struct CellView {
  std::span<const double> W;
  std::span<const double> U;
  std::span<const double> b;
  std::size_t input = 0;
  std::size_t hidden = 0;
};

struct CellGrads {
  std::span<double> W;
  std::span<double> U;
  std::span<double> b;
};

CellView view_of(const LstmCellParams& p);

struct CellCache {
  std::vector<double> x;
  std::vector<double> h_prev;
  std::vector<double> c_prev;
  std::vector<double> gates;  // post-activation i, f, g, o
  std::vector<double> c;
  std::vector<double> tanh_c;
};

/// One step. Writes h and c (each `hidden` long) and fills the cache.
void cell_forward(const CellView& cell, std::span<const double> x, std::span<const double> h_prev,
                  std::span<const double> c_prev, std::span<double> h, std::span<double> c, CellCache& cache);

/// Backward through one step. `dh` and `dc` are the gradients reaching h and
/// c from above and from the next step. Accumulates parameter gradients,
/// adds into `dx`, and overwrites `dh_prev` and `dc_prev`.
void cell_backward(const CellView& cell, const CellCache& cache, std::span<const double> dh, std::span<const double> dc,
                   CellGrads grads, std::span<double> dx, std::span<double> dh_prev, std::span<double> dc_prev);

struct CellState {
  std::vector<double> h;
  std::vector<double> c;
};

CellState cell_forward(const LstmCellParams& params, std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, CellCache* cache = nullptr);

// ---------------------------------------------------------------------------
// Sequences

enum class Direction { Forward, Backward };

struct SequenceCache {
  Direction direction = Direction::Forward;
  std::size_t steps = 0;
  /// Indexed by input row, not by processing order.
  std::vector<CellCache> cells;
};

/// Runs a cell over the rows of `input` from a zero state. The backward
/// direction walks rows t-1..0; either way output row i belongs to input
/// row i. Writes into columns [col_offset, col_offset + H) of `out`.
void sequence_forward(const CellView& cell, const Matrix& input, Direction direction, Matrix& out,
                      std::size_t col_offset, SequenceCache* cache);

Matrix sequence_forward(const LstmCellParams& params, const Matrix& input, Direction direction,
                        SequenceCache* cache = nullptr);

/// BPTT for one direction. Reads the output gradient from columns
/// [col_offset, col_offset + H) of `d_out` and adds the input gradient into
/// `d_input`.
void sequence_backward(const CellView& cell, const SequenceCache& cache, const Matrix& d_out, std::size_t col_offset,
                       CellGrads grads, Matrix& d_input);

// ---------------------------------------------------------------------------
// Model

/// LSTM layers followed by a ReLU dense layer and a linear scalar output.
/// Stacked layers consume the full hidden sequence of the layer below;
/// bidirectional layers concatenate forward and backward hidden states.
class LstmModel {
 public:
  struct LayerCache {
    SequenceCache forward;
    SequenceCache backward;
    Matrix output;
    Matrix dropout_mask;  // empty when dropout is inactive
  };

  struct ForwardCache {
    std::size_t n_features = 0;
    std::size_t steps = 0;
    std::vector<Matrix> layer_inputs;
    std::vector<LayerCache> layers;
    std::vector<double> head_input;  // after dropout
    std::vector<double> head_mask;   // empty when dropout is inactive
    std::vector<double> head_pre;
    std::vector<double> head_act;
    double prediction = 0.0;
  };

  LstmModel(ModelSpec spec, std::size_t n_features);

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t n_features() const noexcept { return n_features_; }
  /// Width of the vector fed to the head: H, or 2H when bidirectional.
  std::size_t feature_width() const noexcept { return spec_.bidirectional() ? 2 * spec_.hidden : spec_.hidden; }

  std::span<Parameter> parameters() noexcept { return params_; }
  std::span<const Parameter> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;

  /// Prediction for one t x F window. Dropout is applied only when
  /// `dropout_rng` is given.
  double forward(const Matrix& window, ForwardCache* cache = nullptr, Rng* dropout_rng = nullptr) const;

  /// Accumulates d(loss)/d(params) into Parameter::grad given
  /// d(loss)/d(prediction). Does not add the L2 term.
  void backward(const ForwardCache& cache, double d_prediction);

  void zero_grad();

  CellView cell(std::size_t layer, Direction direction) const;

 private:
  struct CellSlots {
    std::size_t W = 0;
    std::size_t U = 0;
    std::size_t b = 0;
    std::size_t input = 0;
  };

  CellGrads cell_grads(const CellSlots& slots);
  CellView cell_view(const CellSlots& slots) const;

  ModelSpec spec_;
  std::size_t n_features_;
  std::vector<Parameter> params_;
  std::vector<CellSlots> forward_cells_;
  std::vector<CellSlots> backward_cells_;
  std::size_t head_W_ = 0;
  std::size_t head_b_ = 0;
  std::size_t out_W_ = 0;
  std::size_t out_b_ = 0;
};

/// Closed-form parameter count: 4(HF + HH + H) per cell plus the head.
std::size_t expected_parameter_count(const ModelSpec& spec, std::size_t n_features);

// ---------------------------------------------------------------------------
// Training

struct EpochLoss {
  double train_mse = 0.0;
  double validation_mse = 0.0;
  bool operator==(const EpochLoss&) const = default;
};

struct TrainedModel {
  ModelSpec spec;
  LstmModel model;
  WindowSchema schema;
  /// Maps the target back to counts; an unfitted scaler means identity.
  Scaler scaler;
  std::vector<EpochLoss> loss_history;
  /// 1-based epoch whose parameters were kept.
  std::size_t best_epoch = 0;
};

/// Full-batch training with best-validation snapshotting. The trailing
/// `validation_fraction` of the (chronological) training split is held out;
/// if that leaves nothing to hold out, the training windows double as the
/// validation set. Throws DivergenceError on a non-finite loss.
TrainedModel train(const ModelSpec& spec, const SplitDataset& split, double validation_fraction,
                   const Scaler& scaler = {}, const WindowSchema& schema = {});

TrainedModel train(const ModelSpec& spec, const PreparedData& data);

/// Model output in scaled units.
double predict_scaled(const TrainedModel& model, const Matrix& window);

/// De-scaled regression output. Not clamped: negative counts can come out.
double predict(const TrainedModel& model, const Matrix& window);

// ---------------------------------------------------------------------------
// Persistence: parameter snapshot + JSON sidecar.

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);

void save_model(const TrainedModel& model, const std::filesystem::path& bin_path,
                const std::filesystem::path& json_path);
TrainedModel load_model(const std::filesystem::path& bin_path, const std::filesystem::path& json_path);

std::string loss_history_csv(const std::vector<EpochLoss>& history);

}  // namespace dengue
