#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chronodivide/analysis.hpp"
#include "chronodivide/config.hpp"
#include "chronodivide/corpus.hpp"
#include "chronodivide/features.hpp"
#include "chronodivide/io.hpp"
#include "chronodivide/parallel.hpp"
#include "chronodivide/selection.hpp"
#include "chronodivide/svg.hpp"
#include "chronodivide/synthetic.hpp"

namespace chronodivide::pipeline {

namespace files {
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kExtractReport = "extract_report.json";
inline constexpr const char* kNormalizer = "normalizer.json";
inline constexpr const char* kRepeats = "repeats.csv";
inline constexpr const char* kRanking = "ranking.csv";
inline constexpr const char* kCvCurve = "cv_curve.csv";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kSelection = "selection.json";
inline constexpr const char* kSeries = "series.csv";
inline constexpr const char* kDivide = "divide.json";
inline constexpr const char* kTrend = "trend.json";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kDistances = "distances.csv";
inline constexpr const char* kDistanceSummary = "distance_summary.csv";
inline constexpr const char* kTiming = "timing.json";
inline constexpr const char* kSeriesPlot = "decision_series.svg";
inline constexpr const char* kCvPlot = "cv_curve.svg";
inline constexpr const char* kHeatmap = "distance_heatmap.svg";
}  // namespace files

/// Runs `body`, tagging any non-stage error with `stage`.
template <class F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

inline void prepare_output(const std::filesystem::path& dir) {
  in_stage("output", [&] {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
      throw Error("cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
    }
  });
}

inline void write_output(const std::filesystem::path& path, std::string_view content) {
  in_stage("output", [&] { io::write_file(path, content); });
}

inline std::string read_artifact(const std::filesystem::path& path, const std::string& stage) {
  return in_stage(stage, [&] {
    if (!std::filesystem::exists(path)) {
      throw Error("missing input '" + path.string() + "' (run the earlier stage first)");
    }
    return io::read_file(path);
  });
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- corpus

struct CorpusView {
  std::vector<Document> documents;
  Segmentation segmentation;
};

inline CorpusView load_and_segment(const RunConfig& cfg) {
  return in_stage("corpus", [&] {
    CorpusView view;
    view.documents = load_corpus(cfg.corpus);
    for (const auto& [name, range] : {std::pair<const char*, OrdinalRange>{"class_a", *cfg.class_a},
                                      {"class_b", *cfg.class_b},
                                      {"test", *cfg.test}}) {
      if (range.last >= view.documents.size()) {
        throw Error(std::string(name) + " range " + range.str() + " exceeds corpus of " +
                    std::to_string(view.documents.size()) + " documents");
      }
    }
    view.segmentation = segment_samples(view.documents, cfg.segmentation, cfg.label_ranges());
    return view;
  });
}

// ---------------------------------------------------------------- extract

struct ExtractResult {
  CorpusView corpus;
  FeatureSpec spec;
  FeatureMatrix raw;
  std::vector<std::string> feature_warnings;
};

/// Corpus -> raw feature matrix over every sample, tagged A/B/unlabeled.
/// The vocabulary is counted over all samples of the corpus.
inline ExtractResult extract(const RunConfig& cfg) {
  cfg.validate_pipeline();
  cfg.require_inputs();
  ExtractResult result;
  result.corpus = load_and_segment(cfg);
  in_stage("features", [&] {
    const auto lexicon = load_lexicon(cfg.lexicon);
    result.spec = build_vocabulary(result.corpus.segmentation.samples, lexicon, cfg.k_chars, cfg.k_words);
    result.raw = build_feature_matrix(result.corpus.segmentation.samples, result.spec, &result.feature_warnings);
  });
  return result;
}

inline nlohmann::json extract_report(const RunConfig& cfg, const ExtractResult& r) {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t test = 0;
  for (const auto& s : r.corpus.segmentation.samples) {
    if (s.class_tag == ClassTag::A) ++a;
    if (s.class_tag == ClassTag::B) ++b;
    if (cfg.test->contains(s.document_ordinal)) ++test;
  }
  nlohmann::json j;
  j["documents"] = r.corpus.documents.size();
  j["samples"] = r.corpus.segmentation.samples.size();
  j["training_a"] = a;
  j["training_b"] = b;
  j["test_samples"] = test;
  j["char_features"] = r.spec.char_features.size();
  j["word_features"] = r.spec.word_features.size();
  j["dimension"] = r.spec.total_dim();
  j["short_document"] = r.corpus.segmentation.short_document;
  auto warnings = r.corpus.segmentation.warnings;
  warnings.insert(warnings.end(), r.feature_warnings.begin(), r.feature_warnings.end());
  j["warnings"] = warnings;
  return j;
}

inline nlohmann::json run_extract(const RunConfig& cfg) {
  const auto result = extract(cfg);
  prepare_output(cfg.output);
  write_output(cfg.output / files::kFeatures, feature_matrix_csv(result.raw));
  auto report = extract_report(cfg, result);
  if (cfg.format == OutputFormat::Json) write_output(cfg.output / files::kExtractReport, dump(report));
  return report;
}

// ---------------------------------------------------------------- select

inline nlohmann::json normalizer_to_json(const Normalizer& norm, const std::vector<std::string>& names) {
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& s : norm.substitutions) {
    subs.push_back({{"feature", names.at(s.feature)}, {"divisor", s.divisor}, {"column_all_zero", s.column_all_zero}});
  }
  return {{"feature_names", names}, {"medians", norm.medians}, {"substitutions", subs}};
}

inline std::pair<Normalizer, std::vector<std::string>> normalizer_from_json(const nlohmann::json& j) {
  Normalizer norm;
  const auto names = j.at("feature_names").get<std::vector<std::string>>();
  norm.medians = j.at("medians").get<std::vector<double>>();
  if (norm.medians.size() != names.size()) throw Error("normalizer has mismatched names and medians");
  for (const auto& s : j.at("substitutions")) {
    const auto name = s.at("feature").get<std::string>();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error("normalizer substitution names unknown feature '" + name + "'");
    norm.substitutions.push_back({static_cast<std::size_t>(it - names.begin()), s.at("divisor").get<double>(),
                                  s.at("column_all_zero").get<bool>()});
  }
  return {norm, names};
}

struct SelectResult {
  Normalizer normalizer;
  std::vector<RepeatModel> repeats;
  RankedFeatureList ranking;
  CvCurve curve;
  LinearModel model;
  std::size_t training_a = 0;
  std::size_t training_b = 0;
};

/// Raw matrix -> normalizer fitted on the A/B rows, repeats, rf ranking,
/// cross-validated d* and the final model.
inline SelectResult select(const RunConfig& cfg, const FeatureMatrix& raw, const Executor& executor) {
  SelectResult result;
  const auto training = raw.training_rows();
  DenseMatrix x;
  std::vector<int> y;
  in_stage("features", [&] {
    if (training.empty()) throw Error("no training rows (classes A and B are empty)");
    result.normalizer = fit_normalizer(raw.values, training);
    x = apply_normalizer(raw.values, result.normalizer).select_rows(training);
    y = raw.labels(training);
  });
  for (int label : y) ++(label > 0 ? result.training_a : result.training_b);
  in_stage("selection", [&] {
    result.repeats = run_repeats(x, y, cfg.selection, executor);
    result.ranking = aggregate_rf(result.repeats, cfg.selection.penalty_c);
    result.curve = select_d_star(x, y, result.ranking, cfg.selection, executor);
    result.model = train_final(x, y, result.ranking, result.curve.d_star, cfg.selection.train);
  });
  return result;
}

inline std::string repeats_csv(const std::vector<RepeatModel>& repeats, const std::vector<std::string>& names) {
  std::string out = io::csv_line(
      {"repeat", "subset_size", "validation_errors", "validation_total", "validation_accuracy", "features"});
  for (const auto& r : repeats) {
    std::string features;
    for (std::size_t k = 0; k < r.feature_subset.size(); ++k) {
      if (k) features += ' ';
      features += names.at(r.feature_subset[k]);
    }
    out += io::csv_line({std::to_string(r.repeat_index), std::to_string(r.subset_size),
                         std::to_string(r.validation_errors), std::to_string(r.validation_total),
                         io::format_double(r.validation_accuracy), features});
  }
  return out;
}

inline nlohmann::json selection_report(const SelectResult& r) {
  double mean_accuracy = 0.0;
  for (const auto& m : r.repeats) mean_accuracy += m.validation_accuracy;
  mean_accuracy /= static_cast<double>(std::max<std::size_t>(1, r.repeats.size()));
  return {{"d_star", r.curve.d_star},
          {"eligible_features", r.ranking.eligible()},
          {"repeats", r.repeats.size()},
          {"mean_repeat_accuracy", mean_accuracy},
          {"penalty_c", r.ranking.penalty_c},
          {"cv_mean_error_at_d_star", r.curve.mean_error.at(r.curve.d_star - 1)},
          {"cv_std_error_at_d_star", r.curve.std_error.at(r.curve.d_star - 1)},
          {"training_a", r.training_a},
          {"training_b", r.training_b},
          {"final_model_converged", r.model.converged}};
}

inline nlohmann::json run_select(const RunConfig& cfg, const Executor& executor) {
  cfg.validate_pipeline();
  const auto raw = in_stage("features", [&] {
    return parse_feature_matrix_csv(read_artifact(cfg.output / files::kFeatures, "features"));
  });
  const auto result = select(cfg, raw, executor);
  const auto& names = raw.feature_names;
  write_output(cfg.output / files::kNormalizer, dump(normalizer_to_json(result.normalizer, names)));
  write_output(cfg.output / files::kRepeats, repeats_csv(result.repeats, names));
  write_output(cfg.output / files::kRanking, ranking_csv(result.ranking, names));
  write_output(cfg.output / files::kCvCurve, cv_curve_csv(result.curve));
  write_output(cfg.output / files::kModel, dump(to_json(result.model)));
  auto report = selection_report(result);
  write_output(cfg.output / files::kSelection, dump(report));
  if (cfg.format == OutputFormat::Json && cfg.plots) {
    write_output(cfg.output / files::kCvPlot, svg::cv_curve_plot(result.curve));
  }
  return report;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeResult {
  DecisionSeries series;
  DivideReport divide;
  TrendReport trend;
  nlohmann::json summary;
};

inline LinearModel load_model(const RunConfig& cfg) {
  return in_stage("analysis", [&] {
    return model_from_json(nlohmann::json::parse(read_artifact(cfg.output / files::kModel, "analysis")));
  });
}

inline std::pair<Normalizer, std::vector<std::string>> load_normalizer(const RunConfig& cfg, const std::string& stage) {
  return in_stage(stage, [&] {
    return normalizer_from_json(nlohmann::json::parse(read_artifact(cfg.output / files::kNormalizer, stage)));
  });
}

/// Final model scored on the test-range samples of the corpus, with divide
/// and trend reports and the run summary.
inline AnalyzeResult analyze(const RunConfig& cfg) {
  cfg.validate_pipeline();
  cfg.require_inputs();
  const auto model = load_model(cfg);
  const auto [normalizer, names] = load_normalizer(cfg, "analysis");
  const auto corpus = load_and_segment(cfg);

  AnalyzeResult result;
  std::vector<std::string> feature_warnings;
  in_stage("features", [&] {
    const auto spec = FeatureSpec::from_names(names);
    std::vector<Sample> test;
    for (const auto& s : corpus.segmentation.samples) {
      if (cfg.test->contains(s.document_ordinal)) test.push_back(s);
    }
    const auto matrix = apply_normalizer(build_feature_matrix(test, spec, &feature_warnings), normalizer);
    result.series.values = decision_values(model, matrix.values);
    for (const auto& s : test) {
      result.series.ordinals.push_back(s.ordinal);
      result.series.sample_ids.push_back(s.id);
      result.series.document_ordinals.push_back(s.document_ordinal);
    }
    result.series.source = "model.json";
  });
  in_stage("analysis", [&] {
    result.divide = detect_divide(result.series, cfg.theta, cfg.min_side);
    result.trend = detect_trend(result.series, cfg.permutations, derive_seed(cfg.seed(), "trend", 0));
  });

  const auto selection = in_stage("analysis", [&] {
    return nlohmann::json::parse(read_artifact(cfg.output / files::kSelection, "analysis"));
  });
  const auto ranking = in_stage("analysis", [&] {
    return parse_ranking_csv(read_artifact(cfg.output / files::kRanking, "analysis"), names,
                             cfg.selection.penalty_c);
  });

  auto& s = result.summary;
  s["config"] = cfg.echo();
  std::size_t a = 0;
  std::size_t b = 0;
  for (const auto& sample : corpus.segmentation.samples) {
    a += sample.class_tag == ClassTag::A ? 1 : 0;
    b += sample.class_tag == ClassTag::B ? 1 : 0;
  }
  auto warnings = corpus.segmentation.warnings;
  warnings.insert(warnings.end(), feature_warnings.begin(), feature_warnings.end());
  s["corpus"] = {{"documents", corpus.documents.size()},
                 {"samples", corpus.segmentation.samples.size()},
                 {"training_a", a},
                 {"training_b", b},
                 {"test_samples", result.series.size()},
                 {"short_document", corpus.segmentation.short_document},
                 {"warnings", warnings}};
  s["features"] = {{"dimension", names.size()}, {"median_substitutions", normalizer.substitutions.size()}};
  s["selection"] = selection;
  s["d_star"] = selection.at("d_star");
  nlohmann::json top = nlohmann::json::array();
  const std::size_t shown = std::min(ranking.eligible(), std::max<std::size_t>(8, model.subset_size()));
  for (std::size_t k = 0; k < shown; ++k) {
    const auto& e = ranking.entries[k];
    top.push_back({{"rank", k + 1}, {"feature", names.at(e.feature)}, {"rf", e.rf}, {"appearance_count", e.appearance_count}});
  }
  s["top_features"] = top;
  nlohmann::json final_features = nlohmann::json::array();
  for (auto f : model.active_features) final_features.push_back(names.at(f));
  s["final_features"] = final_features;
  s["model"] = to_json(model);
  s["divide"] = to_json(result.divide);
  s["trend"] = to_json(result.trend);
  return result;
}

inline nlohmann::json run_analyze(const RunConfig& cfg) {
  auto result = analyze(cfg);
  prepare_output(cfg.output);
  write_output(cfg.output / files::kSeries, series_csv(result.series));
  if (cfg.format == OutputFormat::Json) {
    write_output(cfg.output / files::kDivide, dump(to_json(result.divide)));
    write_output(cfg.output / files::kTrend, dump(to_json(result.trend)));
    write_output(cfg.output / files::kSummary, dump(result.summary));
    if (cfg.plots) write_output(cfg.output / files::kSeriesPlot, svg::decision_series_plot(result.series, &result.divide));
  }
  return result.summary;
}

// ---------------------------------------------------------------- distance

/// Distances between normalized samples over the final model's features,
/// grouped by the configured document ranges.
inline DistanceSummary distance(const RunConfig& cfg) {
  cfg.validate_pipeline();
  const auto model = load_model(cfg);
  const auto [normalizer, names] = load_normalizer(cfg, "distance");
  const auto raw = in_stage("distance", [&] {
    return parse_feature_matrix_csv(read_artifact(cfg.output / files::kFeatures, "distance"));
  });
  return in_stage("distance", [&] {
    if (raw.feature_names != names) throw Error("features.csv and normalizer.json disagree on feature names");
    const auto groups = cfg.groups();
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        if (groups[i].second.overlaps(groups[j].second)) {
          throw StageError("config", "distance groups '" + groups[i].first + "' and '" + groups[j].first + "' overlap");
        }
      }
    }
    const auto normalized = apply_normalizer(raw.values, normalizer);
    DenseMatrix x(0, model.active_features.size());
    std::vector<std::size_t> ordinals;
    std::map<std::size_t, std::string> membership;
    std::vector<double> row(model.active_features.size());
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
      for (std::size_t k = 0; k < row.size(); ++k) row[k] = normalized(r, model.active_features[k]);
      x.append_row(row);
      ordinals.push_back(raw.rows[r].ordinal);
      for (const auto& [label, range] : groups) {
        if (range.contains(raw.rows[r].document_ordinal)) membership[raw.rows[r].ordinal] = label;
      }
    }
    return group_distances(x, ordinals, membership);
  });
}

inline nlohmann::json run_distance(const RunConfig& cfg) {
  const auto summary = distance(cfg);
  write_output(cfg.output / files::kDistances, distance_matrix_csv(summary));
  write_output(cfg.output / files::kDistanceSummary, distance_summary_csv(summary));
  if (cfg.format == OutputFormat::Json && cfg.plots) {
    write_output(cfg.output / files::kHeatmap, svg::distance_heatmap(summary));
  }
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : summary.pairs) {
    pairs.push_back({{"group_a", p.group_a}, {"group_b", p.group_b}, {"pairs", p.pairs}, {"mean", p.mean}, {"stddev", p.stddev}});
  }
  return pairs;
}

// ---------------------------------------------------------------- synth / run

inline SyntheticCorpus run_synth(const RunConfig& cfg) {
  return in_stage("synth", [&] {
    if (cfg.synth.output.empty()) throw StageError("config", "[synth] output is required");
    return generate_synthetic(cfg.synth.spec(cfg.seed()), cfg.synth.output);
  });
}

/// extract -> select -> analyze -> distance through the on-disk artifacts,
/// plus timing.json. Returns the run summary.
inline nlohmann::json run_pipeline(const RunConfig& cfg, const Executor& executor) {
  cfg.validate_pipeline();
  prepare_output(cfg.output);
  nlohmann::json timing;
  auto timed = [&](const char* name, const std::function<void()>& body) {
    const auto start = std::chrono::steady_clock::now();
    body();
    timing[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  nlohmann::json summary;
  timed("extract", [&] { run_extract(cfg); });
  timed("select", [&] { run_select(cfg, executor); });
  timed("analyze", [&] { summary = run_analyze(cfg); });
  timed("distance", [&] { run_distance(cfg); });
  write_output(cfg.output / files::kTiming, dump(timing));
  return summary;
}

}  // namespace chronodivide::pipeline
