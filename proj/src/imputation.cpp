#include "dengue/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dengue/csv.hpp"
#include "dengue/error.hpp"
#include "dengue/rng.hpp"

namespace dengue {

namespace {

// sum |a_i - b_i|^p. Monotone in the Minkowski distance, so it ranks
// neighbours without taking the root.
double pow_sum(std::span<const double> a, std::span<const double> b, double p) {
  double sum = 0.0;
  if (p == 2.0) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      sum += d * d;
    }
    return sum;
  }
  const bool integral = p == std::floor(p) && p <= 16.0;
  const int n = static_cast<int>(p);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (integral) {
      double r = 1.0;
      for (int e = 0; e < n; ++e) r *= d;
      sum += r;
    } else {
      sum += std::pow(d, p);
    }
  }
  return sum;
}

struct Neighbor {
  double dist;
  std::size_t index;
};

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
}

// Inserts into a sorted list capped at k entries.
void offer(std::vector<Neighbor>& list, std::size_t k, Neighbor n) {
  if (list.size() == k && !closer(n, list.back())) return;
  auto pos = std::upper_bound(list.begin(), list.end(), n, closer);
  list.insert(pos, n);
  if (list.size() > k) list.pop_back();
}

void nearest(std::span<const LabeledExample> train, std::span<const double> x, const KnnRegressorCfg& cfg,
             std::vector<Neighbor>& out) {
  out.clear();
  const std::size_t k = std::min(cfg.k, train.size());
  for (std::size_t i = 0; i < train.size(); ++i) offer(out, k, {pow_sum(train[i].x, x, cfg.p), i});
}

double neighbor_mean(std::span<const LabeledExample> train, const std::vector<Neighbor>& list) {
  double sum = 0.0;
  for (const auto& n : list) sum += train[n.index].y;
  return sum / static_cast<double>(list.size());
}

void validate_knn(const KnnRegressorCfg& cfg) {
  if (cfg.k < 1) throw Error(ErrorKind::Validation, "kNN needs k >= 1");
  if (!(cfg.p >= 1.0)) throw Error(ErrorKind::Validation, "Minkowski order p must be >= 1");
}

// kNN regressor that keeps every training point's own neighbour list, so the
// effect of one extra training point on a prediction is an O(k) update.
class IncrementalKnn {
 public:
  IncrementalKnn(std::vector<LabeledExample> train, KnnRegressorCfg cfg) : train_(std::move(train)), cfg_(cfg) {
    lists_.resize(train_.size());
    preds_.resize(train_.size());
    for (std::size_t i = 0; i < train_.size(); ++i) refresh(i);
  }

  std::size_t size() const noexcept { return train_.size(); }
  const std::vector<LabeledExample>& train() const noexcept { return train_; }

  void query(std::span<const double> x, std::vector<Neighbor>& out) const { nearest(train_, x, cfg_, out); }

  double predict(std::span<const double> x, std::vector<Neighbor>& scratch) const {
    query(x, scratch);
    return neighbor_mean(train_, scratch);
  }

  double mean_of(const std::vector<Neighbor>& list) const { return neighbor_mean(train_, list); }

  /// Local error reduction over `omega` (the candidate's neighbours) if
  /// (x, y) were appended as training point number size().
  double delta(const std::vector<Neighbor>& omega, std::span<const double> x, double y) const {
    const std::size_t k = std::min(cfg_.k, train_.size() + 1);
    double total = 0.0;
    std::vector<Neighbor> augmented;
    for (const auto& nb : omega) {
      const std::size_t i = nb.index;
      const Neighbor cand{pow_sum(train_[i].x, x, cfg_.p), train_.size()};
      augmented = lists_[i];
      offer(augmented, k, cand);
      const bool entered = std::any_of(augmented.begin(), augmented.end(),
                                       [&](const Neighbor& n) { return n.index == cand.index; });
      if (!entered) continue;
      double sum = 0.0;
      for (const auto& n : augmented) sum += n.index == cand.index ? y : train_[n.index].y;
      const double h_after = sum / static_cast<double>(augmented.size());
      const double yi = train_[i].y;
      const double e_before = yi - preds_[i];
      const double e_after = yi - h_after;
      total += e_before * e_before - e_after * e_after;
    }
    return total;
  }

  void add(LabeledExample e) {
    const std::size_t idx = train_.size();
    train_.push_back(std::move(e));
    lists_.emplace_back();
    preds_.push_back(0.0);
    const std::size_t k = std::min(cfg_.k, train_.size());
    for (std::size_t i = 0; i < idx; ++i) {
      const Neighbor cand{pow_sum(train_[i].x, train_[idx].x, cfg_.p), idx};
      offer(lists_[i], k, cand);
      if (std::any_of(lists_[i].begin(), lists_[i].end(), [&](const Neighbor& n) { return n.index == idx; })) {
        preds_[i] = neighbor_mean(train_, lists_[i]);
      }
    }
    refresh(idx);
  }

 private:
  void refresh(std::size_t i) {
    nearest(train_, train_[i].x, cfg_, lists_[i]);
    preds_[i] = neighbor_mean(train_, lists_[i]);
  }

  std::vector<LabeledExample> train_;
  KnnRegressorCfg cfg_;
  std::vector<std::vector<Neighbor>> lists_;
  std::vector<double> preds_;
};

struct Choice {
  std::optional<std::size_t> unlabeled_index;
  double delta = 0.0;
  double label = 0.0;
};

Choice best_candidate(const IncrementalKnn& reg, std::span<const std::vector<double>> unlabeled,
                      const std::vector<std::size_t>& pool, std::optional<std::size_t> exclude) {
  Choice best;
  std::vector<Neighbor> omega;
  for (const std::size_t u : pool) {
    if (exclude && *exclude == u) continue;
    reg.query(unlabeled[u], omega);
    const double label = reg.mean_of(omega);
    const double delta = reg.delta(omega, unlabeled[u], label);
    if (!(delta > 0.0)) continue;
    if (!best.unlabeled_index || delta > best.delta || (delta == best.delta && u < *best.unlabeled_index)) {
      best = {u, delta, label};
    }
  }
  return best;
}

}  // namespace

void CoregCfg::validate() const {
  validate_knn(first);
  validate_knn(second);
  if (max_iters < 1) throw Error(ErrorKind::Validation, "COREG max_iters must be >= 1");
  if (pool_size < 1) throw Error(ErrorKind::Validation, "COREG pool_size must be >= 1");
  if (!allow_identical_views && first.p == second.p) {
    throw Error(ErrorKind::Validation, "the two COREG regressors must use different distance orders");
  }
}

double minkowski_distance(std::span<const double> a, std::span<const double> b, double p) {
  if (a.size() != b.size()) throw Error(ErrorKind::Shape, "distance between vectors of different length");
  const double s = pow_sum(a, b, p);
  return p == 2.0 ? std::sqrt(s) : std::pow(s, 1.0 / p);
}

double knn_predict(std::span<const LabeledExample> train, std::span<const double> x, const KnnRegressorCfg& cfg) {
  if (train.empty()) throw Error(ErrorKind::EmptyTrain, "kNN prediction with an empty training set");
  validate_knn(cfg);
  std::vector<Neighbor> list;
  nearest(train, x, cfg, list);
  return neighbor_mean(train, list);
}

double coreg_confidence(std::span<const LabeledExample> regressor_train, std::span<const double> candidate_x,
                        double candidate_y, const KnnRegressorCfg& cfg) {
  if (regressor_train.empty()) throw Error(ErrorKind::EmptyTrain, "confidence with an empty training set");
  validate_knn(cfg);
  std::vector<Neighbor> omega;
  nearest(regressor_train, candidate_x, cfg, omega);

  std::vector<LabeledExample> augmented(regressor_train.begin(), regressor_train.end());
  augmented.push_back({std::vector<double>(candidate_x.begin(), candidate_x.end()), candidate_y});

  double total = 0.0;
  for (const auto& nb : omega) {
    const auto& xi = regressor_train[nb.index];
    const double before = xi.y - knn_predict(regressor_train, xi.x, cfg);
    const double after = xi.y - knn_predict(augmented, xi.x, cfg);
    total += before * before - after * after;
  }
  return total;
}

std::string IterationLog::to_text() const {
  std::string out;
  auto pick = [](const std::optional<std::size_t>& p) { return p ? std::to_string(*p) : std::string("none"); };
  for (const auto& e : entries) {
    out += "iteration=" + std::to_string(e.iteration) + " first_pick=" + pick(e.first_pick) +
           " first_delta=" + csv::format_double(e.first_delta) + " first_label=" + csv::format_double(e.first_label) +
           " second_pick=" + pick(e.second_pick) + " second_delta=" + csv::format_double(e.second_delta) +
           " second_label=" + csv::format_double(e.second_label) + "\n";
  }
  out += "stop=" + stop_reason + "\n";
  return out;
}

CoregResult coreg_impute(std::span<const LabeledExample> labeled, std::span<const std::vector<double>> unlabeled,
                         const CoregCfg& cfg) {
  cfg.validate();
  if (labeled.empty()) throw Error(ErrorKind::EmptyTrain, "COREG needs at least one labeled example");
  CoregResult result;
  if (unlabeled.empty()) {
    result.log.stop_reason = "no unlabeled points";
    return result;
  }

  std::vector<LabeledExample> base(labeled.begin(), labeled.end());
  IncrementalKnn first(base, cfg.first);
  IncrementalKnn second(std::move(base), cfg.second);

  std::vector<std::size_t> remaining(unlabeled.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;

  Rng rng(cfg.seed);
  result.log.stop_reason = "max_iters reached";
  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    if (remaining.empty()) {
      result.log.stop_reason = "unlabeled pool exhausted";
      break;
    }
    std::vector<std::size_t> pool = remaining;
    const std::size_t m = std::min(cfg.pool_size, pool.size());
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(m);
    std::sort(pool.begin(), pool.end());

    const Choice c1 = best_candidate(first, unlabeled, pool, std::nullopt);
    const Choice c2 = best_candidate(second, unlabeled, pool, c1.unlabeled_index);
    if (!c1.unlabeled_index && !c2.unlabeled_index) {
      result.log.stop_reason = "no positive confidence";
      break;
    }

    IterationEntry entry;
    entry.iteration = iter;
    if (c1.unlabeled_index) {
      entry.first_pick = c1.unlabeled_index;
      entry.first_delta = c1.delta;
      entry.first_label = c1.label;
      second.add({unlabeled[*c1.unlabeled_index], c1.label});
    }
    if (c2.unlabeled_index) {
      entry.second_pick = c2.unlabeled_index;
      entry.second_delta = c2.delta;
      entry.second_label = c2.label;
      first.add({unlabeled[*c2.unlabeled_index], c2.label});
    }
    std::erase_if(remaining, [&](std::size_t u) { return u == c1.unlabeled_index || u == c2.unlabeled_index; });
    result.log.entries.push_back(entry);
  }

  std::vector<Neighbor> scratch;
  for (std::size_t u = 0; u < unlabeled.size(); ++u) {
    const double a = first.predict(unlabeled[u], scratch);
    const double b = second.predict(unlabeled[u], scratch);
    result.imputed.emplace(u, 0.5 * (a + b));
  }
  return result;
}

std::vector<std::vector<double>> imputation_features(std::span<const DistrictMonthRecord> records) {
  std::vector<std::vector<double>> out;
  if (records.empty()) return out;
  const auto climate = all_climate_features();
  const Scaler scaler = fit_scaler(records, climate);
  out.reserve(records.size());
  for (const auto& r : records) {
    std::vector<double> x;
    for (Feature f : climate) x.push_back(scaler.scale(f, feature_value(r, f)));
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(r.month.month) / 12.0;
    x.push_back(std::sin(angle));
    x.push_back(std::cos(angle));
    out.push_back(std::move(x));
  }
  return out;
}

ImputationOutcome impute_larval(std::span<const DistrictMonthRecord> records, const CoregCfg& cfg) {
  const auto features = imputation_features(records);
  std::vector<LabeledExample> labeled;
  std::vector<std::vector<double>> unlabeled;
  std::vector<std::size_t> unlabeled_rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].larval_index) {
      labeled.push_back({features[i], *records[i].larval_index});
    } else {
      unlabeled.push_back(features[i]);
      unlabeled_rows.push_back(i);
    }
  }
  if (labeled.empty()) {
    throw Error(ErrorKind::EmptyTrain, "no observed larval index in " + std::to_string(records.size()) +
                                           " records; co-training needs labeled examples");
  }

  ImputationOutcome out;
  out.records.assign(records.begin(), records.end());
  out.sources.assign(records.size(), io::LarvalSource::Observed);
  out.observed = labeled.size();
  out.imputed = unlabeled.size();

  auto result = coreg_impute(labeled, unlabeled, cfg);
  for (const auto& [u, value] : result.imputed) {
    out.records[unlabeled_rows[u]].larval_index = value;
    out.sources[unlabeled_rows[u]] = io::LarvalSource::Imputed;
  }
  out.log = std::move(result.log);
  return out;
}

}  // namespace dengue
