#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "chronodivide/analysis.hpp"
#include "chronodivide/io.hpp"
#include "chronodivide/selection.hpp"

namespace chronodivide::svg {

namespace detail {

constexpr double kWidth = 720.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

inline std::string num(double v) {
  // Fixed precision keeps the files small and stable.
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Axes {
  double x0, x1, y0, y1;

  double px(double x) const {
    const double span = x1 > x0 ? x1 - x0 : 1.0;
    return kLeft + (x - x0) / span * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    const double span = y1 > y0 ? y1 - y0 : 1.0;
    return kHeight - kBottom - (y - y0) / span * (kHeight - kTop - kBottom);
  }
};

inline std::string header(std::string_view title) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
                  num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\">" + escape(title) + "</text>\n";
  return s;
}

inline std::string frame(const Axes& a, std::string_view xlabel, std::string_view ylabel) {
  std::string s;
  s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kWidth - kLeft - kRight) +
       "\" height=\"" + num(kHeight - kTop - kBottom) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = a.x0 + (a.x1 - a.x0) * t / 4.0;
    const double yv = a.y0 + (a.y1 - a.y0) * t / 4.0;
    s += "<text x=\"" + num(a.px(xv)) + "\" y=\"" + num(kHeight - kBottom + 16) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + num(xv) + "</text>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(a.py(yv) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(yv) + "</text>\n";
  }
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 10) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(xlabel) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num(kHeight / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"12\" transform=\"rotate(-90 16 " + num(kHeight / 2) + ")\">" + escape(ylabel) + "</text>\n";
  return s;
}

inline Axes fit(double x0, double x1, double y0, double y1) {
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = (y1 - y0) * 0.05;
  return Axes{x0, x1, y0 - pad, y1 + pad};
}

}  // namespace detail

/// Decision values against ordinal, with the zero line and the divide (if any).
inline std::string decision_series_plot(const DecisionSeries& series, const DivideReport* divide = nullptr) {
  using namespace detail;
  if (series.size() == 0) throw Error("cannot plot an empty series");
  const auto [lo, hi] = std::minmax_element(series.values.begin(), series.values.end());
  auto axes = fit(static_cast<double>(series.ordinals.front()), static_cast<double>(series.ordinals.back()),
                  std::min(*lo, 0.0), std::max(*hi, 0.0));
  std::string s = header("Decision values");
  s += frame(axes, "sample ordinal", "S(n)");
  s += "<line x1=\"" + num(axes.px(axes.x0)) + "\" y1=\"" + num(axes.py(0)) + "\" x2=\"" + num(axes.px(axes.x1)) +
       "\" y2=\"" + num(axes.py(0)) + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  if (divide && divide->divide_found && divide->divide_after_ordinal) {
    const double x = static_cast<double>(*divide->divide_after_ordinal) + 0.5;
    s += "<line x1=\"" + num(axes.px(x)) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(axes.px(x)) + "\" y2=\"" +
         num(kHeight - kBottom) + "\" stroke=\"red\"/>\n";
  }
  std::string points;
  for (std::size_t i = 0; i < series.size(); ++i) {
    points += num(axes.px(static_cast<double>(series.ordinals[i]))) + "," + num(axes.py(series.values[i])) + " ";
  }
  s += "<polyline fill=\"none\" stroke=\"steelblue\" points=\"" + points + "\"/>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    s += "<circle cx=\"" + num(axes.px(static_cast<double>(series.ordinals[i]))) + "\" cy=\"" +
         num(axes.py(series.values[i])) + "\" r=\"3\" fill=\"" + (series.values[i] >= 0 ? "steelblue" : "darkorange") +
         "\"><title>" + escape(series.sample_ids[i]) + "</title></circle>\n";
  }
  s += "</svg>\n";
  return s;
}

/// Mean CV error against d with standard-error bars; d* marked.
inline std::string cv_curve_plot(const CvCurve& curve) {
  using namespace detail;
  if (curve.mean_error.empty()) throw Error("cannot plot an empty CV curve");
  double hi = 0.0;
  for (std::size_t i = 0; i < curve.mean_error.size(); ++i) hi = std::max(hi, curve.mean_error[i] + curve.std_error[i]);
  auto axes = fit(1.0, static_cast<double>(curve.mean_error.size()), 0.0, std::max(hi, 0.05));
  std::string s = header("Cross-validation error");
  s += frame(axes, "number of features d", "mean error");
  std::string points;
  for (std::size_t i = 0; i < curve.mean_error.size(); ++i) {
    const double x = axes.px(static_cast<double>(i + 1));
    points += num(x) + "," + num(axes.py(curve.mean_error[i])) + " ";
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(axes.py(curve.mean_error[i] - curve.std_error[i])) + "\" x2=\"" +
         num(x) + "\" y2=\"" + num(axes.py(curve.mean_error[i] + curve.std_error[i])) + "\" stroke=\"gray\"/>\n";
  }
  s += "<polyline fill=\"none\" stroke=\"steelblue\" points=\"" + points + "\"/>\n";
  const double xd = axes.px(static_cast<double>(curve.d_star));
  s += "<circle cx=\"" + num(xd) + "\" cy=\"" + num(axes.py(curve.mean_error[curve.d_star - 1])) +
       "\" r=\"5\" fill=\"none\" stroke=\"red\"><title>d* = " + std::to_string(curve.d_star) + "</title></circle>\n";
  s += "</svg>\n";
  return s;
}

/// Grey-scale heat map of the pairwise distance matrix.
inline std::string distance_heatmap(const DistanceSummary& summary) {
  using namespace detail;
  const std::size_t n = summary.distances.rows();
  if (n == 0) throw Error("cannot plot an empty distance matrix");
  double hi = 0.0;
  for (double v : summary.distances.data()) hi = std::max(hi, v);
  if (hi <= 0.0) hi = 1.0;
  const double size = std::min(kWidth - kLeft - kRight, kHeight - kTop - kBottom);
  const double cell = size / static_cast<double>(n);
  std::string s = header("Pairwise Euclidean distances");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - summary.distances(i, j) / hi)));
      s += "<rect x=\"" + num(kLeft + cell * j) + "\" y=\"" + num(kTop + cell * i) + "\" width=\"" + num(cell) +
           "\" height=\"" + num(cell) + "\" fill=\"rgb(" + std::to_string(shade) + "," + std::to_string(shade) + "," +
           std::to_string(shade) + ")\"/>\n";
    }
  }
  // Group boundaries.
  for (std::size_t i = 1; i < n; ++i) {
    if (summary.groups[i] == summary.groups[i - 1]) continue;
    const double at = cell * i;
    s += "<line x1=\"" + num(kLeft + at) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft + at) + "\" y2=\"" +
         num(kTop + size) + "\" stroke=\"red\"/>\n";
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + at) + "\" x2=\"" + num(kLeft + size) + "\" y2=\"" +
         num(kTop + at) + "\" stroke=\"red\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace chronodivide::svg
