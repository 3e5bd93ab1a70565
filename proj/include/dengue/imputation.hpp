#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dengue/dataprep.hpp"
#include "dengue/io.hpp"

namespace dengue {

struct LabeledExample {
  std::vector<double> x;
  double y = 0.0;
};

struct KnnRegressorCfg {
  std::size_t k = 3;
  /// Minkowski distance order.
  double p = 2.0;
};

struct CoregCfg {
  KnnRegressorCfg first{3, 2.0};
  KnnRegressorCfg second{3, 5.0};
  std::size_t max_iters = 100;
  std::size_t pool_size = 100;
  std::uint64_t seed = 0;
  /// Both regressors identical. Only meaningful as a sanity check.
  bool allow_identical_views = false;

  void validate() const;
};

/// (sum |a_i - b_i|^p)^(1/p).
double minkowski_distance(std::span<const double> a, std::span<const double> b, double p);

/// Mean label of the k nearest training examples; ties in distance go to the
/// earlier training example. k larger than the training set uses all of it.
double knn_predict(std::span<const LabeledExample> train, std::span<const double> x, const KnnRegressorCfg& cfg);

/// Local error reduction from adding (candidate_x, candidate_y) to the
/// training set, summed over the candidate's k nearest labeled neighbours:
///   sum_i (y_i - h(x_i))^2 - (y_i - h'(x_i))^2
/// Positive means the addition helps.
double coreg_confidence(std::span<const LabeledExample> regressor_train, std::span<const double> candidate_x,
                        double candidate_y, const KnnRegressorCfg& cfg);

struct IterationEntry {
  std::size_t iteration = 0;
  /// Unlabeled index chosen by each regressor (handed to its peer).
  std::optional<std::size_t> first_pick;
  double first_delta = 0.0;
  double first_label = 0.0;
  std::optional<std::size_t> second_pick;
  double second_delta = 0.0;
  double second_label = 0.0;

  bool operator==(const IterationEntry&) const = default;
};

struct IterationLog {
  std::vector<IterationEntry> entries;
  std::string stop_reason;

  /// One line per iteration plus a final stop line.
  std::string to_text() const;
  bool operator==(const IterationLog&) const = default;
};

struct CoregResult {
  /// Index into the unlabeled list -> imputed value.
  std::map<std::size_t, double> imputed;
  IterationLog log;
};

/// Co-training regression over two kNN regressors with different distance
/// orders. Each round both regressors score a random pool of unlabeled
/// points, pick the one whose self-labelling most reduces local error, and
/// hand it to the other regressor. The final estimate averages both.
CoregResult coreg_impute(std::span<const LabeledExample> labeled, std::span<const std::vector<double>> unlabeled,
                         const CoregCfg& cfg);

/// Scaled temperature, humidity and rainfall plus a sine/cosine encoding of
/// the calendar month, one row per record.
std::vector<std::vector<double>> imputation_features(std::span<const DistrictMonthRecord> records);

struct ImputationOutcome {
  std::vector<DistrictMonthRecord> records;
  std::vector<io::LarvalSource> sources;
  IterationLog log;
  std::size_t observed = 0;
  std::size_t imputed = 0;
};

/// Fills every absent larval index with COREG. Throws EmptyTrain when no
/// record has an observed value.
ImputationOutcome impute_larval(std::span<const DistrictMonthRecord> records, const CoregCfg& cfg);

}  // namespace dengue
