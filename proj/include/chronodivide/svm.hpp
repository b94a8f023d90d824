#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chronodivide/error.hpp"
#include "chronodivide/matrix.hpp"

namespace chronodivide {

struct TrainConfig {
  double regularization_c = 1.0;
  double tolerance = 1e-6;
  std::size_t max_iterations = 100000;
  // Carried for reproducibility records; the solver itself draws no random numbers.
  std::uint64_t seed = 0;

  void validate() const {
    if (!(regularization_c > 0.0)) throw Error("regularization C must be positive");
    if (!(tolerance > 0.0)) throw Error("solver tolerance must be positive");
    if (max_iterations < 1) throw Error("max_iterations must be at least 1");
  }
};

/// Soft-margin linear classifier w.x + b over a subset of feature columns.
struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<std::size_t> active_features;
  double regularization_c = 1.0;
  std::optional<double> validation_accuracy;
  bool converged = true;
  std::size_t iterations = 0;
  double max_kkt_violation = 0.0;

  std::size_t subset_size() const { return active_features.size(); }

  double decision(std::span<const double> row) const {
    double value = bias;
    for (std::size_t k = 0; k < weights.size(); ++k) value += weights[k] * row[active_features[k]];
    return value;
  }
};

namespace detail {

inline void check_labels(std::size_t rows, std::span<const int> y) {
  if (rows != y.size()) throw Error("row count and label count differ");
  bool pos = false;
  bool neg = false;
  for (int label : y) {
    if (label == 1) {
      pos = true;
    } else if (label == -1) {
      neg = true;
    } else {
      throw Error("labels must be +1 or -1");
    }
  }
  if (!pos || !neg) throw Error("training data must contain both classes");
}

/// Row order that depends only on the multiset of (row, label) pairs, so
/// training is invariant under permutation of the input rows.
inline std::vector<std::size_t> canonical_row_order(const DenseMatrix& x, std::span<const int> y,
                                                    std::span<const std::size_t> columns) {
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (auto c : columns) {
      const double va = x(a, c);
      const double vb = x(b, c);
      if (va != vb) return va < vb;
    }
    if (y[a] != y[b]) return y[a] < y[b];
    return false;
  });
  return order;
}

/// SMO for  min 1/2 a'Qa - e'a  s.t.  y'a = 0, 0 <= a <= C  with
/// Q_ij = y_i y_j K_ij and a linear kernel K kept explicitly, using
/// maximal-violating-pair selection with second-order choice of the partner.
class DualSolver {
 public:
  DualSolver(std::vector<int> y, double c)
      : n_(y.size()), y_(std::move(y)), c_(c), kernel_(n_ * n_, 0.0), alpha_(n_, 0.0) {}

  std::size_t size() const { return n_; }

  /// K += sign * x x'  for one feature column x (length n).
  void update_kernel(std::span<const double> column, double sign) {
    for (std::size_t i = 0; i < n_; ++i) {
      const double xi = sign * column[i];
      if (xi == 0.0) continue;
      double* row = kernel_.data() + i * n_;
      for (std::size_t j = 0; j < n_; ++j) row[j] += xi * column[j];
    }
  }

  struct Outcome {
    std::size_t iterations = 0;
    bool converged = false;
    double violation = 0.0;
  };

  /// Continues from the current dual point until the maximal KKT violation
  /// m(a) - M(a) drops to `tolerance` or the iteration budget runs out.
  Outcome solve(double tolerance, std::size_t max_iterations) {
    constexpr double kTau = 1e-12;
    grad_.assign(n_, -1.0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (alpha_[j] == 0.0) continue;
      const double* kj = kernel_.data() + j * n_;
      const double s = alpha_[j] * y_[j];
      for (std::size_t i = 0; i < n_; ++i) grad_[i] += y_[i] * s * kj[i];
    }

    Outcome out;
    for (;;) {
      double gmax = -std::numeric_limits<double>::infinity();
      std::size_t i = n_;
      for (std::size_t t = 0; t < n_; ++t) {
        if (in_up(t)) {
          const double v = -y_[t] * grad_[t];
          if (v > gmax) {
            gmax = v;
            i = t;
          }
        }
      }
      double gmin = std::numeric_limits<double>::infinity();
      std::size_t j = n_;
      double best = std::numeric_limits<double>::infinity();
      const double* ki = i < n_ ? kernel_.data() + i * n_ : nullptr;
      for (std::size_t t = 0; t < n_; ++t) {
        if (!in_low(t)) continue;
        const double v = -y_[t] * grad_[t];
        gmin = std::min(gmin, v);
        const double b = gmax - v;
        if (i < n_ && b > 0.0) {
          double a = ki[i] + kernel_[t * n_ + t] - 2.0 * ki[t];
          if (a <= 0.0) a = kTau;
          const double score = -(b * b) / a;
          if (score < best) {
            best = score;
            j = t;
          }
        }
      }
      out.violation = (i < n_ && std::isfinite(gmin)) ? std::max(0.0, gmax - gmin) : 0.0;
      if (i == n_ || j == n_ || out.violation <= tolerance) {
        out.converged = true;
        break;
      }
      if (out.iterations >= max_iterations) break;
      step(i, j, kTau);
      ++out.iterations;
    }
    return out;
  }

  /// Bias b of the decision function sum_i a_i y_i K(x_i, x) + b.
  double bias() const {
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n_; ++t) {
      const double yg = y_[t] * grad_[t];
      if (alpha_[t] >= c_) {
        if (y_[t] == -1) upper = std::min(upper, yg); else lower = std::max(lower, yg);
      } else if (alpha_[t] <= 0.0) {
        if (y_[t] == 1) upper = std::min(upper, yg); else lower = std::max(lower, yg);
      } else {
        free_sum += yg;
        ++free_count;
      }
    }
    double rho = 0.0;
    if (free_count > 0) {
      rho = free_sum / static_cast<double>(free_count);
    } else if (std::isfinite(upper) && std::isfinite(lower)) {
      rho = (upper + lower) / 2.0;
    } else if (std::isfinite(upper)) {
      rho = upper;
    } else if (std::isfinite(lower)) {
      rho = lower;
    }
    return -rho;
  }

  const std::vector<double>& alpha() const { return alpha_; }
  std::span<const int> labels() const { return y_; }

 private:
  bool in_up(std::size_t t) const {
    return y_[t] == 1 ? alpha_[t] < c_ : alpha_[t] > 0.0;
  }
  bool in_low(std::size_t t) const {
    return y_[t] == 1 ? alpha_[t] > 0.0 : alpha_[t] < c_;
  }

  void step(std::size_t i, std::size_t j, double tau) {
    const double* ki = kernel_.data() + i * n_;
    const double* kj = kernel_.data() + j * n_;
    const double old_i = alpha_[i];
    const double old_j = alpha_[j];
    double& ai = alpha_[i];
    double& aj = alpha_[j];
    double quad = ki[i] + kj[j] - 2.0 * ki[j];
    if (quad <= 0.0) quad = tau;
    if (y_[i] != y_[j]) {
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = -diff; }
      }
      if (diff > 0.0) {
        if (ai > c_) { ai = c_; aj = c_ - diff; }
      } else {
        if (aj > c_) { aj = c_; ai = c_ + diff; }
      }
    } else {
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c_) {
        if (ai > c_) { ai = c_; aj = sum - c_; }
      } else {
        if (aj < 0.0) { aj = 0.0; ai = sum; }
      }
      if (sum > c_) {
        if (aj > c_) { aj = c_; ai = sum - c_; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = sum; }
      }
    }
    const double di = (ai - old_i) * y_[i];
    const double dj = (aj - old_j) * y_[j];
    for (std::size_t k = 0; k < n_; ++k) grad_[k] += y_[k] * (ki[k] * di + kj[k] * dj);
  }

  std::size_t n_;
  std::vector<int> y_;
  double c_;
  std::vector<double> kernel_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
};

}  // namespace detail

/// Trains on a changing set of feature columns, reusing the kernel and the
/// previous dual solution between fits. Rows are kept in canonical order.
class SubsetTrainer {
 public:
  SubsetTrainer(const DenseMatrix& x, std::span<const int> y, const TrainConfig& cfg)
      : cfg_(cfg) {
    cfg_.validate();
    detail::check_labels(x.rows(), y);
    std::vector<std::size_t> all(x.cols());
    std::iota(all.begin(), all.end(), 0);
    const auto order = detail::canonical_row_order(x, y, all);
    std::vector<int> sorted_y(order.size());
    columns_.assign(x.cols(), std::vector<double>(order.size()));
    for (std::size_t r = 0; r < order.size(); ++r) {
      sorted_y[r] = y[order[r]];
      for (std::size_t c = 0; c < x.cols(); ++c) columns_[c][r] = x(order[r], c);
    }
    solver_.emplace(std::move(sorted_y), cfg_.regularization_c);
  }

  const std::vector<std::size_t>& active() const { return active_; }

  void add_feature(std::size_t feature) {
    if (feature >= columns_.size()) throw Error("feature index out of range");
    if (std::find(active_.begin(), active_.end(), feature) != active_.end()) return;
    solver_->update_kernel(columns_[feature], 1.0);
    active_.push_back(feature);
  }

  void remove_feature(std::size_t feature) {
    const auto it = std::find(active_.begin(), active_.end(), feature);
    if (it == active_.end()) throw Error("feature is not active");
    solver_->update_kernel(columns_[feature], -1.0);
    active_.erase(it);
  }

  LinearModel fit() {
    if (active_.empty()) throw Error("no active features to train on");
    const auto outcome = solver_->solve(cfg_.tolerance, cfg_.max_iterations);
    LinearModel model;
    model.active_features = active_;
    model.regularization_c = cfg_.regularization_c;
    model.converged = outcome.converged;
    model.iterations = outcome.iterations;
    model.max_kkt_violation = outcome.violation;
    model.bias = solver_->bias();
    const auto& alpha = solver_->alpha();
    const auto y = solver_->labels();
    model.weights.assign(active_.size(), 0.0);
    for (std::size_t k = 0; k < active_.size(); ++k) {
      const auto& col = columns_[active_[k]];
      double w = 0.0;
      for (std::size_t i = 0; i < col.size(); ++i) {
        if (alpha[i] != 0.0) w += alpha[i] * y[i] * col[i];
      }
      model.weights[k] = w;
    }
    return model;
  }

 private:
  TrainConfig cfg_;
  std::vector<std::vector<double>> columns_;
  std::optional<detail::DualSolver> solver_;
  std::vector<std::size_t> active_;
};

/// Fits  min 1/2 |w|^2 + C sum hinge(y_i (w.x_i + b))  on the given columns.
inline LinearModel train_linear_svm(const DenseMatrix& x, std::span<const int> y,
                                    std::span<const std::size_t> active_features,
                                    const TrainConfig& cfg) {
  cfg.validate();
  detail::check_labels(x.rows(), y);
  if (active_features.empty()) throw Error("at least one active feature is required");
  for (auto f : active_features) {
    if (f >= x.cols()) throw Error("active feature " + std::to_string(f) + " out of range");
  }
  SubsetTrainer trainer(x, y, cfg);
  for (auto f : active_features) {
    if (std::find(trainer.active().begin(), trainer.active().end(), f) != trainer.active().end()) {
      throw Error("active feature " + std::to_string(f) + " listed twice");
    }
    trainer.add_feature(f);
  }
  return trainer.fit();
}

inline LinearModel train_linear_svm(const DenseMatrix& x, std::span<const int> y, const TrainConfig& cfg) {
  std::vector<std::size_t> all(x.cols());
  std::iota(all.begin(), all.end(), 0);
  return train_linear_svm(x, y, all, cfg);
}

/// w.x_i + b for every row, in row order.
inline std::vector<double> decision_values(const LinearModel& model, const DenseMatrix& x) {
  for (auto f : model.active_features) {
    if (f >= x.cols()) throw Error("feature column " + std::to_string(f) + " is missing");
  }
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = model.decision(x.row(r));
  return out;
}

/// Classification with zero counted as the positive class.
inline int classify(double decision) { return decision >= 0.0 ? 1 : -1; }

struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t errors = 0;
  std::size_t total = 0;

  /// "errors/total", as validation errors are usually reported.
  std::string ratio() const { return std::to_string(errors) + "/" + std::to_string(total); }
};

inline AccuracyResult accuracy(const LinearModel& model, const DenseMatrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) throw Error("row count and label count differ");
  if (y.empty()) throw Error("accuracy of an empty set is undefined");
  const auto values = decision_values(model, x);
  AccuracyResult result;
  result.total = y.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (classify(values[i]) != y[i]) ++result.errors;
  }
  result.accuracy = 1.0 - static_cast<double>(result.errors) / static_cast<double>(result.total);
  return result;
}

/// SVM-RFE: retrain, drop the feature with the smallest |w| (higher index on
/// ties), repeat. Returns all column indices, most important first.
inline std::vector<std::size_t> rfe_rank(const DenseMatrix& x, std::span<const int> y, const TrainConfig& cfg) {
  if (x.cols() == 0) throw Error("RFE needs at least one feature");
  SubsetTrainer trainer(x, y, cfg);
  for (std::size_t f = 0; f < x.cols(); ++f) trainer.add_feature(f);
  std::vector<std::size_t> removed;
  removed.reserve(x.cols());
  while (trainer.active().size() > 1) {
    const auto model = trainer.fit();
    std::size_t worst = 0;
    for (std::size_t k = 1; k < model.weights.size(); ++k) {
      const double a = std::abs(model.weights[k]);
      const double b = std::abs(model.weights[worst]);
      if (a < b || (a == b && model.active_features[k] > model.active_features[worst])) worst = k;
    }
    const auto feature = model.active_features[worst];
    trainer.remove_feature(feature);
    removed.push_back(feature);
  }
  std::vector<std::size_t> ranking(trainer.active());
  ranking.insert(ranking.end(), removed.rbegin(), removed.rend());
  return ranking;
}

inline nlohmann::json to_json(const LinearModel& model) {
  nlohmann::json j;
  j["active_features"] = model.active_features;
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["regularization_c"] = model.regularization_c;
  j["validation_accuracy"] = model.validation_accuracy ? nlohmann::json(*model.validation_accuracy)
                                                       : nlohmann::json(nullptr);
  j["subset_size"] = model.subset_size();
  j["convergence_flag"] = model.converged;
  return j;
}

inline LinearModel model_from_json(const nlohmann::json& j) {
  LinearModel model;
  try {
    model.active_features = j.at("active_features").get<std::vector<std::size_t>>();
    model.weights = j.at("weights").get<std::vector<double>>();
    model.bias = j.at("bias").get<double>();
    model.regularization_c = j.at("regularization_c").get<double>();
    if (!j.at("validation_accuracy").is_null()) {
      model.validation_accuracy = j.at("validation_accuracy").get<double>();
    }
    model.converged = j.at("convergence_flag").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model JSON: ") + e.what());
  }
  if (model.weights.size() != model.active_features.size()) {
    throw Error("model JSON has mismatched weights and active_features");
  }
  if (model.active_features.empty()) throw Error("model JSON has no active features");
  return model;
}

}  // namespace chronodivide
