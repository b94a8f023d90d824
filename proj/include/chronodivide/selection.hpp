#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "chronodivide/error.hpp"
#include "chronodivide/io.hpp"
#include "chronodivide/matrix.hpp"
#include "chronodivide/parallel.hpp"
#include "chronodivide/rng.hpp"
#include "chronodivide/svm.hpp"

namespace chronodivide {

struct SelectionConfig {
  std::size_t repeats = 100;  // M (also called T)
  double modeling_fraction = 2.0 / 3.0;
  std::size_t cv_runs = 50;
  double cv_fraction = 2.0 / 3.0;
  double penalty_c = 1.0 / 30.0;
  std::uint64_t master_seed = 0;
  TrainConfig train;

  void validate() const {
    if (repeats < 1) throw Error("repeats must be at least 1");
    if (cv_runs < 1) throw Error("cv_runs must be at least 1");
    if (!(modeling_fraction > 0.0 && modeling_fraction < 1.0)) throw Error("modeling_fraction must lie in (0, 1)");
    if (!(cv_fraction > 0.0 && cv_fraction < 1.0)) throw Error("cv_fraction must lie in (0, 1)");
    if (!(penalty_c > 0.0)) throw Error("penalty_c must be positive");
    train.validate();
  }
};

/// Best model of one randomized modeling/validation repeat.
struct RepeatModel {
  std::size_t repeat_index = 0;
  std::vector<std::size_t> feature_subset;  // ranking prefix, most important first
  std::size_t subset_size = 0;
  double validation_accuracy = 0.0;
  std::size_t validation_errors = 0;
  std::size_t validation_total = 0;
  std::uint64_t seed = 0;
};

struct RankedEntry {
  std::size_t feature = 0;
  double rf = 0.0;
  std::size_t appearance_count = 0;
};

/// Features by descending relative frequency, ties by ascending index.
struct RankedFeatureList {
  std::vector<RankedEntry> entries;
  std::size_t repeat_count = 0;
  double penalty_c = 1.0 / 30.0;

  /// Length of the leading run of entries with rf > 0.
  std::size_t eligible() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                  [](const RankedEntry& e) { return e.rf > 0.0; }));
  }

  std::vector<std::size_t> top(std::size_t d) const {
    if (d > entries.size()) throw Error("requested more features than ranked");
    std::vector<std::size_t> out(d);
    for (std::size_t k = 0; k < d; ++k) out[k] = entries[k].feature;
    return out;
  }
};

struct StratifiedSplit {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
};

/// Per class, a shuffled round(fraction * n_class) rows go to `first`, the
/// rest to `second`. Both parts receive at least one row of each class.
inline StratifiedSplit stratified_split(std::span<const int> y, double fraction, Rng& rng) {
  StratifiedSplit split;
  for (int label : {1, -1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == label) members.push_back(i);
    }
    if (members.size() < 2) {
      throw Error("stratified split impossible: class " + std::to_string(label) + " has " +
                  std::to_string(members.size()) + " rows");
    }
    rng.shuffle(std::span<std::size_t>(members));
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    split.first.insert(split.first.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    split.second.insert(split.second.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(split.first.begin(), split.first.end());
  std::sort(split.second.begin(), split.second.end());
  return split;
}

namespace detail {

inline std::vector<int> pick(std::span<const int> y, std::span<const std::size_t> rows) {
  std::vector<int> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = y[rows[i]];
  return out;
}

inline std::size_t count_errors(const LinearModel& model, const DenseMatrix& x, std::span<const int> y) {
  std::size_t errors = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (classify(model.decision(x.row(r))) != y[r]) ++errors;
  }
  return errors;
}

}  // namespace detail

/// One pseudo-aggregation repeat: stratified modeling/validation split, RFE
/// on the modeling part, then the ranking prefix with the fewest validation
/// errors (shortest prefix on ties).
inline RepeatModel run_repeat(const DenseMatrix& x, std::span<const int> y, const SelectionConfig& cfg,
                              std::size_t j) {
  if (x.rows() != y.size()) throw Error("row count and label count differ");
  RepeatModel result;
  result.repeat_index = j;
  result.seed = derive_seed(cfg.master_seed, "repeat", j);
  Rng rng(result.seed);
  const auto split = stratified_split(y, cfg.modeling_fraction, rng);
  const auto modeling = x.select_rows(split.first);
  const auto validation = x.select_rows(split.second);
  const auto y_modeling = detail::pick(y, split.first);
  const auto y_validation = detail::pick(y, split.second);

  const auto ranking = rfe_rank(modeling, y_modeling, cfg.train);
  SubsetTrainer trainer(modeling, y_modeling, cfg.train);
  std::size_t best_d = 0;
  std::size_t best_errors = validation.rows() + 1;
  for (std::size_t d = 1; d <= ranking.size(); ++d) {
    trainer.add_feature(ranking[d - 1]);
    const auto errors = detail::count_errors(trainer.fit(), validation, y_validation);
    if (errors < best_errors) {
      best_errors = errors;
      best_d = d;
      if (errors == 0) break;  // no longer prefix can do better
    }
  }
  result.feature_subset.assign(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(best_d));
  result.subset_size = best_d;
  result.validation_errors = best_errors;
  result.validation_total = validation.rows();
  result.validation_accuracy =
      1.0 - static_cast<double>(best_errors) / static_cast<double>(validation.rows());
  return result;
}

inline std::vector<RepeatModel> run_repeats(const DenseMatrix& x, std::span<const int> y,
                                            const SelectionConfig& cfg, const Executor& executor) {
  cfg.validate();
  std::vector<RepeatModel> models(cfg.repeats);
  executor.for_each_index(cfg.repeats, [&](std::size_t j) { models[j] = run_repeat(x, y, cfg, j); });
  return models;
}

/// Accuracy weight exp((A-1)/[2A-1]_+), taken as 0 for A <= 1/2.
inline double weight_g(double accuracy) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw Error("accuracy must lie in [0, 1]");
  if (accuracy <= 0.5) return 0.0;
  return std::exp((accuracy - 1.0) / (2.0 * accuracy - 1.0));
}

/// Model-size weight [1 - c n]_+.
inline double weight_h(std::size_t n, double c) {
  if (!(c > 0.0)) throw Error("penalty c must be positive");
  return std::max(0.0, 1.0 - c * static_cast<double>(n));
}

/// rf(x) = (1/M) sum_j g(A_j) h(n_j) 1(x in model j). Contributions are
/// summed in repeat-index order, so the result does not depend on the order
/// of `models`.
inline RankedFeatureList aggregate_rf(std::span<const RepeatModel> models, double c) {
  if (models.empty()) throw Error("aggregation needs at least one repeat");
  std::vector<const RepeatModel*> ordered;
  ordered.reserve(models.size());
  for (const auto& m : models) ordered.push_back(&m);
  std::stable_sort(ordered.begin(), ordered.end(), [](const RepeatModel* a, const RepeatModel* b) {
    if (a->repeat_index != b->repeat_index) return a->repeat_index < b->repeat_index;
    if (a->validation_accuracy != b->validation_accuracy) return a->validation_accuracy < b->validation_accuracy;
    return a->feature_subset < b->feature_subset;
  });

  std::map<std::size_t, RankedEntry> by_feature;
  for (const auto* m : ordered) {
    const double weight = weight_g(m->validation_accuracy) * weight_h(m->subset_size, c);
    for (auto f : m->feature_subset) {
      auto& e = by_feature[f];
      e.feature = f;
      e.rf += weight;
      ++e.appearance_count;
    }
  }
  RankedFeatureList list;
  list.repeat_count = models.size();
  list.penalty_c = c;
  for (auto& [f, e] : by_feature) {
    e.rf /= static_cast<double>(models.size());
    list.entries.push_back(e);
  }
  std::sort(list.entries.begin(), list.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    return a.rf != b.rf ? a.rf > b.rf : a.feature < b.feature;
  });
  return list;
}

/// Mean and standard error of the held-out error for every prefix size.
struct CvCurve {
  std::vector<double> mean_error;  // index d-1
  std::vector<double> std_error;
  std::size_t d_star = 0;
};

/// Cross-validated number of top-ranked features: the smallest d whose mean
/// error is within one standard error of the minimum.
inline CvCurve select_d_star(const DenseMatrix& x, std::span<const int> y, const RankedFeatureList& ranking,
                             const SelectionConfig& cfg, const Executor& executor) {
  cfg.validate();
  const std::size_t candidates = ranking.eligible();
  if (candidates == 0) throw Error("no feature has a positive relative frequency");
  const auto features = ranking.top(candidates);

  std::vector<std::vector<double>> run_errors(cfg.cv_runs);
  executor.for_each_index(cfg.cv_runs, [&](std::size_t run) {
    Rng rng(derive_seed(cfg.master_seed, "cv", run));
    const auto split = stratified_split(y, cfg.cv_fraction, rng);
    const auto train = x.select_rows(split.first);
    const auto test = x.select_rows(split.second);
    const auto y_train = detail::pick(y, split.first);
    const auto y_test = detail::pick(y, split.second);
    SubsetTrainer trainer(train, y_train, cfg.train);
    auto& errors = run_errors[run];
    errors.resize(candidates);
    for (std::size_t d = 1; d <= candidates; ++d) {
      trainer.add_feature(features[d - 1]);
      errors[d - 1] = static_cast<double>(detail::count_errors(trainer.fit(), test, y_test)) /
                      static_cast<double>(test.rows());
    }
  });

  CvCurve curve;
  curve.mean_error.assign(candidates, 0.0);
  curve.std_error.assign(candidates, 0.0);
  const double runs = static_cast<double>(cfg.cv_runs);
  for (std::size_t d = 0; d < candidates; ++d) {
    double sum = 0.0;
    for (const auto& e : run_errors) sum += e[d];
    const double mean = sum / runs;
    double ss = 0.0;
    for (const auto& e : run_errors) ss += (e[d] - mean) * (e[d] - mean);
    curve.mean_error[d] = mean;
    curve.std_error[d] = cfg.cv_runs > 1 ? std::sqrt(ss / (runs - 1.0)) / std::sqrt(runs) : 0.0;
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(curve.mean_error.begin(), curve.mean_error.end()) - curve.mean_error.begin());
  const double limit = curve.mean_error[best] + curve.std_error[best];
  for (std::size_t d = 0; d < candidates; ++d) {
    if (curve.mean_error[d] <= limit) {
      curve.d_star = d + 1;
      break;
    }
  }
  return curve;
}

/// Final classifier on all training rows over the top d_star features.
inline LinearModel train_final(const DenseMatrix& x, std::span<const int> y, const RankedFeatureList& ranking,
                               std::size_t d_star, const TrainConfig& cfg) {
  if (d_star < 1 || d_star > ranking.entries.size()) {
    throw Error("d* = " + std::to_string(d_star) + " outside 1.." + std::to_string(ranking.entries.size()));
  }
  return train_linear_svm(x, y, ranking.top(d_star), cfg);
}

inline std::string ranking_csv(const RankedFeatureList& ranking, const std::vector<std::string>& names) {
  std::string out = io::csv_line({"rank", "feature_name", "rf", "appearance_count"});
  for (std::size_t k = 0; k < ranking.entries.size(); ++k) {
    const auto& e = ranking.entries[k];
    out += io::csv_line({std::to_string(k + 1), e.feature < names.size() ? names[e.feature] : std::to_string(e.feature),
                         io::format_double(e.rf), std::to_string(e.appearance_count)});
  }
  return out;
}

/// Inverse of ranking_csv given the feature names of the matrix.
inline RankedFeatureList parse_ranking_csv(std::string_view text, const std::vector<std::string>& names,
                                           double penalty_c) {
  const auto records = io::parse_csv(text);
  if (records.empty() || records.front() != std::vector<std::string>{"rank", "feature_name", "rf", "appearance_count"}) {
    throw Error("ranking CSV has an unexpected header");
  }
  RankedFeatureList list;
  list.penalty_c = penalty_c;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.size() != 4) throw Error("ranking CSV row " + std::to_string(i) + " is malformed");
    const auto it = std::find(names.begin(), names.end(), rec[1]);
    if (it == names.end()) throw Error("ranking CSV names unknown feature '" + rec[1] + "'");
    list.entries.push_back({static_cast<std::size_t>(it - names.begin()), io::parse_double(rec[2]),
                            static_cast<std::size_t>(io::parse_double(rec[3]))});
  }
  return list;
}

inline std::string cv_curve_csv(const CvCurve& curve) {
  std::string out = io::csv_line({"d", "mean_error", "std_error"});
  for (std::size_t d = 0; d < curve.mean_error.size(); ++d) {
    out += io::csv_line({std::to_string(d + 1), io::format_double(curve.mean_error[d]),
                         io::format_double(curve.std_error[d])});
  }
  return out;
}

}  // namespace chronodivide
