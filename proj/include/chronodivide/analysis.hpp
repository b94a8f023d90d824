#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chronodivide/error.hpp"
#include "chronodivide/io.hpp"
#include "chronodivide/matrix.hpp"
#include "chronodivide/rng.hpp"
#include "chronodivide/svm.hpp"

namespace chronodivide {

/// Decision values S(n) of a classifier over chronologically ordered samples.
struct DecisionSeries {
  std::vector<double> values;
  std::vector<std::size_t> ordinals;  // strictly increasing
  std::vector<std::string> sample_ids;
  std::vector<std::size_t> document_ordinals;  // optional; empty or one per value
  std::string source;

  std::size_t size() const { return values.size(); }

  void validate() const {
    if (ordinals.size() != values.size() || sample_ids.size() != values.size()) {
      throw Error("decision series fields have different lengths");
    }
    if (!document_ordinals.empty() && document_ordinals.size() != values.size()) {
      throw Error("decision series document ordinals have the wrong length");
    }
    for (std::size_t i = 1; i < ordinals.size(); ++i) {
      if (ordinals[i] <= ordinals[i - 1]) throw Error("decision series ordinals must increase strictly");
    }
  }

  /// Series with ordinals first, first+1, ... and ids equal to the ordinals.
  static DecisionSeries from_values(std::vector<double> values, std::size_t first_ordinal = 0) {
    DecisionSeries s;
    s.values = std::move(values);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      s.ordinals.push_back(first_ordinal + i);
      s.sample_ids.push_back(std::to_string(first_ordinal + i));
    }
    return s;
  }
};

enum class Orientation { PositiveThenNegative, NegativeThenPositive };

inline std::string_view to_string(Orientation o) {
  return o == Orientation::PositiveThenNegative ? "positive-then-negative" : "negative-then-positive";
}

struct DivideReport {
  bool divide_found = false;
  std::optional<std::size_t> divide_after_ordinal;   // set when a divide is found
  std::optional<std::size_t> divide_after_document;  // likewise, when documents are known
  std::size_t best_split = 0;                        // samples before the best split
  std::size_t best_split_after_ordinal = 0;
  Orientation orientation = Orientation::PositiveThenNegative;
  double agreement = 0.0;
  std::size_t agreeing = 0;
  std::size_t total = 0;
  std::vector<std::size_t> outliers;  // ordinals with the wrong sign under the best split
  double threshold = 0.95;
  std::size_t min_side = 5;
};

/// Best single sign change: over every split leaving at least min_side
/// samples per side, and both orientations, maximize the fraction of samples
/// whose sign matches their side (zero counts as positive). Earliest split
/// wins ties.
inline DivideReport detect_divide(const DecisionSeries& series, double threshold = 0.95,
                                  std::size_t min_side = 5) {
  series.validate();
  if (min_side < 1) throw Error("min_side must be at least 1");
  const std::size_t n = series.size();
  if (n < 2 * min_side) {
    throw Error("series of " + std::to_string(n) + " values is too short for min_side=" + std::to_string(min_side));
  }
  std::vector<std::size_t> positives(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) positives[i + 1] = positives[i] + (series.values[i] >= 0.0 ? 1 : 0);

  DivideReport report;
  report.threshold = threshold;
  report.min_side = min_side;
  report.total = n;
  bool have = false;
  for (std::size_t k = min_side; k + min_side <= n; ++k) {
    const std::size_t negatives_after = (n - k) - (positives[n] - positives[k]);
    const std::size_t pos_neg = positives[k] + negatives_after;
    const std::size_t neg_pos = n - pos_neg;
    for (auto [agree, orient] : {std::pair{pos_neg, Orientation::PositiveThenNegative},
                                 std::pair{neg_pos, Orientation::NegativeThenPositive}}) {
      if (!have || agree > report.agreeing) {
        have = true;
        report.agreeing = agree;
        report.best_split = k;
        report.orientation = orient;
      }
    }
  }
  report.agreement = static_cast<double>(report.agreeing) / static_cast<double>(n);
  report.best_split_after_ordinal = series.ordinals[report.best_split - 1];
  const bool first_positive = report.orientation == Orientation::PositiveThenNegative;
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = series.values[i] >= 0.0;
    const bool expected_positive = (i < report.best_split) == first_positive;
    if (positive != expected_positive) report.outliers.push_back(series.ordinals[i]);
  }
  report.divide_found = report.agreement >= threshold;
  if (report.divide_found) {
    report.divide_after_ordinal = report.best_split_after_ordinal;
    if (!series.document_ordinals.empty()) {
      report.divide_after_document = series.document_ordinals[report.best_split - 1];
    }
  }
  return report;
}

struct TrendReport {
  double slope = 0.0;
  double intercept = 0.0;
  double kendall_tau = 0.0;
  double p_value = 1.0;
  std::size_t permutations = 0;  // permutations evaluated
  bool exact = false;            // all n! orderings were enumerated
};

/// Kendall's tau-b between sample position and value.
inline double kendall_tau(std::span<const double> values) {
  const std::size_t n = values.size();
  std::int64_t concordant_minus_discordant = 0;
  std::int64_t untied_pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (values[j] > values[i]) {
        ++concordant_minus_discordant;
        ++untied_pairs;
      } else if (values[j] < values[i]) {
        --concordant_minus_discordant;
        ++untied_pairs;
      }
    }
  }
  if (untied_pairs == 0) return 0.0;
  const double total_pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(concordant_minus_discordant) / std::sqrt(total_pairs * static_cast<double>(untied_pairs));
}

/// Least-squares slope per sample, Kendall's tau and a two-sided permutation
/// p-value on |tau|. Series short enough that n! <= permutations are
/// enumerated exactly; longer series use `permutations` seeded shuffles and
/// p = (1 + #{|tau_perm| >= |tau|}) / (permutations + 1).
inline TrendReport detect_trend(const DecisionSeries& series, std::size_t permutations = 1000,
                                std::uint64_t seed = 0) {
  series.validate();
  const std::size_t n = series.size();
  if (n < 3) throw Error("trend detection needs at least 3 values");
  if (permutations < 1) throw Error("permutations must be at least 1");

  TrendReport report;
  const double mean_x = static_cast<double>(n - 1) / 2.0;
  const double mean_y = std::accumulate(series.values.begin(), series.values.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - mean_x;
    sxy += dx * (series.values[i] - mean_y);
    sxx += dx * dx;
  }
  report.slope = sxy / sxx;
  report.intercept = mean_y - report.slope * mean_x;

  const bool constant = std::all_of(series.values.begin(), series.values.end(),
                                    [&](double v) { return v == series.values.front(); });
  if (constant) {
    report.slope = 0.0;
    report.intercept = series.values.front();
    report.permutations = 0;
    return report;
  }
  report.kendall_tau = kendall_tau(series.values);
  const double observed = std::abs(report.kendall_tau) - 1e-12;

  std::size_t factorial = 1;
  bool small = true;
  for (std::size_t k = 2; k <= n && small; ++k) {
    factorial *= k;
    if (factorial > permutations) small = false;
  }
  std::vector<double> work(series.values);
  std::size_t extreme = 0;
  if (small) {
    std::vector<std::size_t> index(n);
    std::iota(index.begin(), index.end(), 0);
    std::size_t evaluated = 0;
    do {
      for (std::size_t i = 0; i < n; ++i) work[i] = series.values[index[i]];
      if (std::abs(kendall_tau(work)) >= observed) ++extreme;
      ++evaluated;
    } while (std::next_permutation(index.begin(), index.end()));
    report.exact = true;
    report.permutations = evaluated;
    report.p_value = static_cast<double>(extreme) / static_cast<double>(evaluated);
  } else {
    for (std::size_t p = 0; p < permutations; ++p) {
      std::copy(series.values.begin(), series.values.end(), work.begin());
      Rng rng(derive_seed(seed, "permutation", p));
      rng.shuffle(std::span<double>(work));
      if (std::abs(kendall_tau(work)) >= observed) ++extreme;
    }
    report.permutations = permutations;
    report.p_value = static_cast<double>(1 + extreme) / static_cast<double>(permutations + 1);
  }
  return report;
}

struct GroupPairDistance {
  std::string group_a;
  std::string group_b;
  std::size_t pairs = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct DistanceSummary {
  std::vector<std::size_t> ordinals;
  std::vector<std::string> groups;  // group of each row of `distances`
  DenseMatrix distances;
  std::vector<GroupPairDistance> pairs;
};

/// Pairwise Euclidean distances between the rows whose ordinal has a group,
/// plus mean/stddev of distances per unordered group pair (self-pairs
/// excluded within a group).
inline DistanceSummary group_distances(const DenseMatrix& x, std::span<const std::size_t> row_ordinals,
                                       const std::map<std::size_t, std::string>& groups) {
  if (row_ordinals.size() != x.rows()) throw Error("row ordinal count does not match matrix");
  std::vector<std::string> labels;
  for (const auto& [ordinal, label] : groups) {
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
  }
  std::sort(labels.begin(), labels.end());
  if (labels.size() < 2) throw Error("distance comparison needs at least two groups");

  DistanceSummary summary;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (const auto it = groups.find(row_ordinals[r]); it != groups.end()) {
      rows.push_back(r);
      summary.ordinals.push_back(row_ordinals[r]);
      summary.groups.push_back(it->second);
    }
  }
  for (const auto& label : labels) {
    if (std::find(summary.groups.begin(), summary.groups.end(), label) == summary.groups.end()) {
      throw Error("group '" + label + "' is empty");
    }
  }
  const std::size_t k = rows.size();
  summary.distances = DenseMatrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      double ss = 0.0;
      const auto a = x.row(rows[i]);
      const auto b = x.row(rows[j]);
      for (std::size_t c = 0; c < a.size(); ++c) ss += (a[c] - b[c]) * (a[c] - b[c]);
      summary.distances(i, j) = summary.distances(j, i) = std::sqrt(ss);
    }
  }
  for (std::size_t ga = 0; ga < labels.size(); ++ga) {
    for (std::size_t gb = ga; gb < labels.size(); ++gb) {
      GroupPairDistance pair{labels[ga], labels[gb]};
      double sum = 0.0;
      double sum_sq = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          if (i == j) continue;
          if (ga == gb ? (j < i || summary.groups[i] != labels[ga] || summary.groups[j] != labels[ga])
                       : (summary.groups[i] != labels[ga] || summary.groups[j] != labels[gb])) {
            continue;
          }
          const double d = summary.distances(i, j);
          sum += d;
          sum_sq += d * d;
          ++pair.pairs;
        }
      }
      if (pair.pairs > 0) {
        pair.mean = sum / static_cast<double>(pair.pairs);
        pair.stddev = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(pair.pairs) - pair.mean * pair.mean));
      }
      summary.pairs.push_back(pair);
    }
  }
  return summary;
}

inline std::string series_csv(const DecisionSeries& series) {
  std::string out = io::csv_line({"ordinal", "sample_id", "decision_value"});
  for (std::size_t i = 0; i < series.size(); ++i) {
    out += io::csv_line({std::to_string(series.ordinals[i]), series.sample_ids[i], io::format_double(series.values[i])});
  }
  return out;
}

inline nlohmann::json to_json(const DivideReport& r) {
  nlohmann::json j;
  j["divide_found"] = r.divide_found;
  j["divide_after_ordinal"] = r.divide_after_ordinal ? nlohmann::json(*r.divide_after_ordinal) : nlohmann::json(nullptr);
  j["divide_after_document"] =
      r.divide_after_document ? nlohmann::json(*r.divide_after_document) : nlohmann::json(nullptr);
  j["best_split_after_ordinal"] = r.best_split_after_ordinal;
  j["orientation"] = to_string(r.orientation);
  j["agreement"] = r.agreement;
  j["agreeing"] = r.agreeing;
  j["total"] = r.total;
  j["outliers"] = r.outliers;
  j["threshold"] = r.threshold;
  j["min_side"] = r.min_side;
  return j;
}

inline nlohmann::json to_json(const TrendReport& r) {
  return {{"slope", r.slope},     {"intercept", r.intercept},       {"kendall_tau", r.kendall_tau},
          {"p_value", r.p_value}, {"permutations", r.permutations}, {"exact", r.exact}};
}

inline std::string distance_matrix_csv(const DistanceSummary& s) {
  std::vector<std::string> header = {"ordinal", "group"};
  for (auto o : s.ordinals) header.push_back(std::to_string(o));
  std::string out = io::csv_line(header);
  for (std::size_t i = 0; i < s.ordinals.size(); ++i) {
    std::vector<std::string> fields = {std::to_string(s.ordinals[i]), s.groups[i]};
    for (std::size_t j = 0; j < s.ordinals.size(); ++j) fields.push_back(io::format_double(s.distances(i, j)));
    out += io::csv_line(fields);
  }
  return out;
}

inline std::string distance_summary_csv(const DistanceSummary& s) {
  std::string out = io::csv_line({"group_a", "group_b", "pairs", "mean_distance", "std_distance"});
  for (const auto& p : s.pairs) {
    out += io::csv_line({p.group_a, p.group_b, std::to_string(p.pairs), io::format_double(p.mean),
                         io::format_double(p.stddev)});
  }
  return out;
}

}  // namespace chronodivide
