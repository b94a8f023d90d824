#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "chronodivide/analysis.hpp"
#include "chronodivide/svg.hpp"

using namespace chronodivide;

namespace {

/// Ordinals 61..90, positive through 80 except ordinal 67, then negative.
DecisionSeries chapter_80_series() {
  std::vector<double> v;
  for (std::size_t ord = 61; ord <= 90; ++ord) {
    const double magnitude = 0.3 + 0.05 * static_cast<double>(ord % 7);
    v.push_back(ord <= 80 ? (ord == 67 ? -magnitude : magnitude) : -magnitude);
  }
  return DecisionSeries::from_values(v, 61);
}

double naive_agreement(const std::vector<double>& v, std::size_t k, bool first_positive) {
  std::size_t good = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    good += ((v[i] >= 0.0) == ((i < k) == first_positive)) ? 1 : 0;
  }
  return static_cast<double>(good) / static_cast<double>(v.size());
}

/// Tau-b by direct pair counting.
double naive_tau(const std::vector<double>& v) {
  double concordant = 0, discordant = 0, ties_y = 0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (v[j] > v[i]) ++concordant;
      else if (v[j] < v[i]) ++discordant;
      else ++ties_y;
    }
  }
  const double pairs = n * (n - 1) / 2.0;
  return (concordant - discordant) / std::sqrt(pairs * (pairs - ties_y));
}

}  // namespace

TEST(DetectDivide, ChapterEightyExample) {
  const auto r = detect_divide(chapter_80_series());
  EXPECT_TRUE(r.divide_found);
  ASSERT_TRUE(r.divide_after_ordinal.has_value());
  EXPECT_EQ(*r.divide_after_ordinal, 80u);
  EXPECT_EQ(r.agreeing, 29u);
  EXPECT_EQ(r.total, 30u);
  EXPECT_NEAR(r.agreement, 29.0 / 30.0, 1e-12);
  EXPECT_EQ(r.outliers, (std::vector<std::size_t>{67}));
  EXPECT_EQ(r.orientation, Orientation::PositiveThenNegative);
}

TEST(DetectDivide, AllPositiveHasNoDivide) {
  const auto r = detect_divide(DecisionSeries::from_values(std::vector<double>(30, 1.0)));
  EXPECT_FALSE(r.divide_found);
  EXPECT_FALSE(r.divide_after_ordinal.has_value());
}

TEST(DetectDivide, AlternatingSigns) {
  std::vector<double> v;
  for (int i = 0; i < 30; ++i) v.push_back(i % 2 ? -1.0 : 1.0);
  const auto r = detect_divide(DecisionSeries::from_values(v));
  EXPECT_FALSE(r.divide_found);
  EXPECT_NEAR(r.agreement, 16.0 / 30.0, 1e-12);
}

TEST(DetectDivide, ZeroCountsAsPositive) {
  std::vector<double> v(10, 0.0);
  for (std::size_t i = 5; i < 10; ++i) v[i] = -1.0;
  const auto r = detect_divide(DecisionSeries::from_values(v));
  EXPECT_TRUE(r.divide_found);
  EXPECT_EQ(*r.divide_after_ordinal, 4u);
  EXPECT_DOUBLE_EQ(r.agreement, 1.0);
}

TEST(DetectDivide, MinSideIsEnforced) {
  std::vector<double> v(30, 1.0);
  for (std::size_t i = 27; i < 30; ++i) v[i] = -1.0;
  const auto r = detect_divide(DecisionSeries::from_values(v));
  EXPECT_EQ(r.best_split, 25u);
  EXPECT_NEAR(r.agreement, 28.0 / 30.0, 1e-12);
  EXPECT_FALSE(r.divide_found);
  const auto loose = detect_divide(DecisionSeries::from_values(v), 0.95, 3);
  EXPECT_TRUE(loose.divide_found);
  EXPECT_EQ(*loose.divide_after_ordinal, 26u);
  EXPECT_DOUBLE_EQ(loose.agreement, 1.0);
}

TEST(DetectDivide, ShortSeriesIsAnError) {
  EXPECT_THROW(detect_divide(DecisionSeries::from_values(std::vector<double>(9, 1.0))), Error);
}

TEST(DetectDivide, ReportedSplitMaximizesAgreementAndFlipsWithSign) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 10 + gen() % 30;
    const std::size_t change = gen() % n;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = normal(gen) + (i < change ? 0.8 : -0.8);
    const auto r = detect_divide(DecisionSeries::from_values(v));
    double best = 0.0;
    // Only splits leaving min_side samples on each side are candidates.
    for (std::size_t k = 5; k + 5 <= n; ++k) {
      best = std::max({best, naive_agreement(v, k, true), naive_agreement(v, k, false)});
    }
    EXPECT_NEAR(r.agreement, best, 1e-12);
    EXPECT_NEAR(naive_agreement(v, r.best_split, r.orientation == Orientation::PositiveThenNegative), r.agreement,
                1e-12);

    // Exact zeros would break the symmetry.
    if (std::any_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) continue;
    std::vector<double> flipped(v);
    for (double& x : flipped) x = -x;
    const auto f = detect_divide(DecisionSeries::from_values(flipped));
    EXPECT_EQ(f.best_split, r.best_split);
    EXPECT_DOUBLE_EQ(f.agreement, r.agreement);
    // At agreement 1/2 both orientations tie on the same split.
    if (r.agreement != 0.5) {
      EXPECT_NE(f.orientation, r.orientation);
    }
    EXPECT_EQ(f.divide_found, r.divide_found);
  }
}

TEST(DetectDivide, DocumentOrdinalIsReported) {
  auto s = chapter_80_series();
  for (std::size_t o : s.ordinals) s.document_ordinals.push_back(o / 2);
  const auto r = detect_divide(s);
  ASSERT_TRUE(r.divide_after_document.has_value());
  EXPECT_EQ(*r.divide_after_document, 40u);
}

TEST(DetectTrend, StrictlyDecreasing) {
  std::vector<double> v;
  for (int i = 0; i < 10; ++i) v.push_back(10.0 - i);
  const auto r = detect_trend(DecisionSeries::from_values(v), 1000, 1);
  EXPECT_DOUBLE_EQ(r.kendall_tau, -1.0);
  EXPECT_NEAR(r.slope, -1.0, 1e-12);
  EXPECT_FALSE(r.exact);
  EXPECT_NEAR(r.p_value, 1.0 / 1001.0, 1e-15);
}

TEST(DetectTrend, ConstantSeries) {
  const auto r = detect_trend(DecisionSeries::from_values(std::vector<double>(12, 0.25)), 1000, 1);
  EXPECT_DOUBLE_EQ(r.kendall_tau, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  EXPECT_DOUBLE_EQ(r.slope, 0.0);
}

TEST(DetectTrend, SixElementsMatchExhaustiveEnumeration) {
  const std::vector<double> v = {0.4, -0.1, 0.3, -0.7, -0.2, -0.9};
  std::vector<double> perm(v);
  std::sort(perm.begin(), perm.end());
  const double observed = std::abs(naive_tau(v));
  std::size_t extreme = 0, total = 0;
  do {
    extreme += std::abs(naive_tau(perm)) >= observed - 1e-12 ? 1 : 0;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  ASSERT_EQ(total, 720u);
  const auto r = detect_trend(DecisionSeries::from_values(v), 1000, 7);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.permutations, 720u);
  EXPECT_NEAR(r.kendall_tau, naive_tau(v), 1e-12);
  EXPECT_NEAR(r.p_value, static_cast<double>(extreme) / 720.0, 1e-12);
}

TEST(DetectTrend, TauMatchesPairCountingWithTies) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(3 + gen() % 25);
    for (double& x : v) x = static_cast<double>(gen() % 5);
    if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) continue;
    EXPECT_NEAR(kendall_tau(v), naive_tau(v), 1e-12);
  }
}

TEST(DetectTrend, MonteCarloIsSeededAndBounded) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(20);
  for (double& x : v) x = normal(gen);
  const auto s = DecisionSeries::from_values(v);
  const auto a = detect_trend(s, 500, 3);
  const auto b = detect_trend(s, 500, 3);
  EXPECT_EQ(a.p_value, b.p_value);
  EXPECT_GE(a.p_value, 1.0 / 501.0);
  EXPECT_LE(a.p_value, 1.0);
  EXPECT_EQ(a.permutations, 500u);
  EXPECT_THROW(detect_trend(DecisionSeries::from_values({1.0, 2.0}), 10, 0), Error);
}

TEST(GroupDistances, SmallExamples) {
  DenseMatrix x(0, 2);
  x.append_row(std::vector<double>{0.0, 0.0});
  x.append_row(std::vector<double>{3.0, 4.0});
  x.append_row(std::vector<double>{3.0, 4.0});
  const std::vector<std::size_t> ordinals = {0, 1, 2};
  const auto s = group_distances(x, ordinals, {{0, "A"}, {1, "B"}, {2, "B"}});
  EXPECT_DOUBLE_EQ(s.distances(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(s.distances(1, 2), 0.0);
  ASSERT_EQ(s.pairs.size(), 3u);  // A/A, A/B, B/B
  EXPECT_EQ(s.pairs[0].pairs, 0u);
  EXPECT_EQ(s.pairs[1].pairs, 2u);
  EXPECT_DOUBLE_EQ(s.pairs[1].mean, 5.0);
  EXPECT_DOUBLE_EQ(s.pairs[1].stddev, 0.0);
  EXPECT_EQ(s.pairs[2].pairs, 1u);
  EXPECT_DOUBLE_EQ(s.pairs[2].mean, 0.0);
}

TEST(GroupDistances, BruteForceAndMetricProperties) {
  std::mt19937_64 gen(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix x(0, 4);
  std::vector<std::size_t> ordinals;
  std::map<std::size_t, std::string> groups;
  for (std::size_t i = 0; i < 15; ++i) {
    std::vector<double> row(4);
    for (double& v : row) v = normal(gen);
    x.append_row(row);
    ordinals.push_back(10 + i);
    if (i != 7) groups[10 + i] = i < 5 ? "A" : (i < 10 ? "B" : "C");
  }
  const auto s = group_distances(x, ordinals, groups);
  ASSERT_EQ(s.distances.rows(), 14u);
  for (std::size_t i = 0; i < 14; ++i) {
    EXPECT_DOUBLE_EQ(s.distances(i, i), 0.0);
    const std::size_t ri = s.ordinals[i] - 10;
    for (std::size_t j = 0; j < 14; ++j) {
      const std::size_t rj = s.ordinals[j] - 10;
      double ss = 0.0;
      for (std::size_t c = 0; c < 4; ++c) ss += std::pow(x(ri, c) - x(rj, c), 2);
      EXPECT_NEAR(s.distances(i, j), std::sqrt(ss), 1e-12);
      EXPECT_EQ(s.distances(i, j), s.distances(j, i));
      for (std::size_t k = 0; k < 14; ++k) {
        EXPECT_LE(s.distances(i, k), s.distances(i, j) + s.distances(j, k) + 1e-12);
      }
    }
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < 14; ++i) {
    for (std::size_t j = 0; j < 14; ++j) {
      if (s.groups[i] == "A" && s.groups[j] == "C") {
        sum += s.distances(i, j);
        ++count;
      }
    }
  }
  const auto ac = std::find_if(s.pairs.begin(), s.pairs.end(),
                               [](const auto& p) { return p.group_a == "A" && p.group_b == "C"; });
  ASSERT_NE(ac, s.pairs.end());
  EXPECT_EQ(ac->pairs, count);
  EXPECT_NEAR(ac->mean, sum / count, 1e-12);
}

TEST(GroupDistances, Errors) {
  DenseMatrix x(2, 1);
  const std::vector<std::size_t> ordinals = {0, 1};
  EXPECT_THROW(group_distances(x, ordinals, {{0, "A"}, {1, "A"}}), Error);
  EXPECT_THROW(group_distances(x, ordinals, {{0, "A"}, {5, "B"}}), Error);
}

TEST(Exports, SeriesCsvAndPlots) {
  const auto s = chapter_80_series();
  const auto csv = series_csv(s);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "ordinal,sample_id,decision_value");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 31);
  const auto r = detect_divide(s);
  const auto j = to_json(r);
  EXPECT_EQ(j["divide_after_ordinal"], 80);
  EXPECT_EQ(j["outliers"], nlohmann::json::array({67}));
  const auto svg = svg::decision_series_plot(s, &r);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("stroke=\"red\""), std::string::npos);
}
