#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "chronodivide/corpus.hpp"
#include "chronodivide/error.hpp"
#include "chronodivide/io.hpp"
#include "chronodivide/selection.hpp"
#include "chronodivide/synthetic.hpp"

namespace chronodivide {

enum class OutputFormat { Json, Csv };

inline OutputFormat parse_output_format(std::string_view s) {
  if (s == "json") return OutputFormat::Json;
  if (s == "csv") return OutputFormat::Csv;
  throw Error("unknown format '" + std::string(s) + "' (expected json or csv)");
}

struct SynthConfig {
  std::size_t alphabet = 200;
  std::size_t shifted = 10;
  double factor = 2.0;
  double zipf = 0.0;
  std::size_t chars_per_chapter = 3000;
  std::size_t chapters_a = 80;
  std::size_t chapters_b = 40;
  Transition transition = Transition::Step;
  double sentence_end_probability = 0.05;
  double exclamation_share = 0.1;
  double quote_probability = 0.1;
  std::filesystem::path output;

  SyntheticSpec spec(std::uint64_t seed) const {
    auto s = planted_spec(alphabet, shifted, factor, zipf);
    s.chars_per_chapter = chars_per_chapter;
    s.chapters_a = chapters_a;
    s.chapters_b = chapters_b;
    s.transition = transition;
    s.sentence_end_probability = sentence_end_probability;
    s.exclamation_share = exclamation_share;
    s.quote_probability = quote_probability;
    s.seed = seed;
    return s;
  }
};

struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path lexicon;
  std::optional<OrdinalRange> class_a;
  std::optional<OrdinalRange> class_b;
  std::optional<OrdinalRange> test;
  SegmentationPolicy segmentation;
  std::size_t k_chars = 500;
  std::size_t k_words = 300;
  SelectionConfig selection;  // master_seed and train config live here
  double theta = 0.95;
  std::size_t min_side = 5;
  std::size_t permutations = 1000;
  bool plots = true;
  std::vector<std::pair<std::string, OrdinalRange>> distance_groups;
  SynthConfig synth;
  std::filesystem::path output = "chronodivide_out";
  std::size_t threads = 0;
  OutputFormat format = OutputFormat::Json;

  std::uint64_t seed() const { return selection.master_seed; }

  std::vector<LabelRange> label_ranges() const {
    return {{*class_a, ClassTag::A}, {*class_b, ClassTag::B}};
  }

  /// Groups for the distance comparison; defaults to A, B and the test range.
  std::vector<std::pair<std::string, OrdinalRange>> groups() const {
    if (!distance_groups.empty()) return distance_groups;
    return {{"A", *class_a}, {"B", *class_b}, {"test", *test}};
  }

  /// Checks needed by every pipeline stage. Synth-only use skips this.
  void validate_pipeline() const {
    if (corpus.empty()) throw StageError("config", "[corpus] path is required");
    if (!class_a || !class_b || !test) throw StageError("config", "[labels] class_a, class_b and test are required");
    const std::vector<std::pair<std::string, OrdinalRange>> ranges = {
        {"class_a", *class_a}, {"class_b", *class_b}, {"test", *test}};
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      for (std::size_t j = i + 1; j < ranges.size(); ++j) {
        if (ranges[i].second.overlaps(ranges[j].second)) {
          throw StageError("config", ranges[i].first + " " + ranges[i].second.str() + " overlaps " + ranges[j].first +
                                         " " + ranges[j].second.str());
        }
      }
    }
    if (segmentation.balance_mode != BalanceMode::None && !segmentation.balance_range) {
      throw StageError("config", "balance_mode " + std::string(to_string(segmentation.balance_mode)) +
                                     " needs balance_range");
    }
    if (!(theta > 0.0 && theta <= 1.0)) throw StageError("config", "theta must lie in (0, 1]");
    if (min_side < 1) throw StageError("config", "min_side must be at least 1");
    if (permutations < 1) throw StageError("config", "permutations must be at least 1");
    try {
      selection.validate();
    } catch (const Error& e) {
      throw StageError("config", e.what());
    }
  }

  /// Paths that must exist before extraction.
  void require_inputs() const {
    if (!std::filesystem::exists(corpus)) throw StageError("config", "corpus '" + corpus.string() + "' does not exist");
    if (lexicon.empty()) throw StageError("config", "[corpus] lexicon is required");
    if (!std::filesystem::exists(lexicon)) {
      throw StageError("config", "lexicon '" + lexicon.string() + "' does not exist");
    }
  }

  /// Everything that influences results. Output location, thread count and
  /// format are left out so reports do not depend on them.
  nlohmann::json echo() const {
    nlohmann::json j;
    j["seed"] = selection.master_seed;
    j["corpus"] = {{"path", corpus.string()},
                   {"lexicon", lexicon.string()},
                   {"min_chars", segmentation.min_chars},
                   {"balance_mode", to_string(segmentation.balance_mode)},
                   {"balance_range", segmentation.balance_range ? nlohmann::json(segmentation.balance_range->str())
                                                                : nlohmann::json(nullptr)}};
    j["labels"] = {{"class_a", class_a ? class_a->str() : ""},
                   {"class_b", class_b ? class_b->str() : ""},
                   {"test", test ? test->str() : ""}};
    j["features"] = {{"k_chars", k_chars}, {"k_words", k_words}};
    j["selection"] = {{"repeats", selection.repeats},
                      {"modeling_fraction", selection.modeling_fraction},
                      {"cv_runs", selection.cv_runs},
                      {"cv_fraction", selection.cv_fraction},
                      {"penalty_c", selection.penalty_c}};
    j["svm"] = {{"c", selection.train.regularization_c},
                {"tolerance", selection.train.tolerance},
                {"max_iterations", selection.train.max_iterations}};
    j["analysis"] = {{"theta", theta}, {"min_side", min_side}, {"permutations", permutations}};
    return j;
  }
};

namespace detail {

inline std::string unquote(std::string value) {
  if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
    return value.substr(1, value.size() - 2);
  }
  return value;
}

/// Typed access to one section, rejecting keys nobody asked for.
class Section {
 public:
  Section(const boost::property_tree::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> text(const std::string& key) {
    seen_.insert(key);
    if (!tree_) return std::nullopt;
    const auto child = tree_->get_child_optional(boost::property_tree::ptree::path_type(key, '\0'));
    if (!child) return std::nullopt;
    return unquote(child->data());
  }

  void real(const std::string& key, double& out) {
    if (auto v = text(key)) out = parse_real(key, *v);
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (auto v = text(key)) {
      std::uint64_t parsed = 0;
      const auto* end = v->data() + v->size();
      const auto [ptr, ec] = std::from_chars(v->data(), end, parsed);
      if (ec != std::errc() || ptr != end) fail(key, "expected a non-negative integer, got '" + *v + "'");
      out = static_cast<Int>(parsed);
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (auto v = text(key)) {
      if (*v == "true") {
        out = true;
      } else if (*v == "false") {
        out = false;
      } else {
        fail(key, "expected true or false, got '" + *v + "'");
      }
    }
  }

  void range(const std::string& key, std::optional<OrdinalRange>& out) {
    if (auto v = text(key)) {
      try {
        out = OrdinalRange::parse(*v);
      } catch (const Error& e) {
        fail(key, e.what());
      }
    }
  }

  void path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
    if (auto v = text(key)) {
      std::filesystem::path p(*v);
      out = p.is_absolute() ? p : (base / p).lexically_normal();
    }
  }

  void check_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!seen_.count(key)) fail(key, "unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw StageError("config", (name_.empty() ? key : "[" + name_ + "] " + key) + ": " + message);
  }

 private:
  double parse_real(const std::string& key, const std::string& v) const {
    try {
      if (const auto slash = v.find('/'); slash != std::string::npos) {
        const double num = io::parse_double(v.substr(0, slash));
        const double den = io::parse_double(v.substr(slash + 1));
        if (den == 0.0) fail(key, "division by zero");
        return num / den;
      }
      return io::parse_double(v);
    } catch (const StageError&) {
      throw;
    } catch (const Error&) {
      fail(key, "expected a number, got '" + v + "'");
    }
  }

  const boost::property_tree::ptree* tree_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Parses an INI-style config: `[section]` headers, `key = value` lines and
/// full-line '#' or ';' comments. Quoted values are unquoted; reals accept
/// `a/b`. Relative paths resolve against `base_dir`.
inline RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw StageError("config", "line " + std::to_string(e.line()) + ": " + e.message());
  }

  const std::set<std::string> sections = {"corpus", "labels", "features", "selection",
                                          "svm",    "analysis", "distance", "synth"};
  RunConfig cfg;
  pt::ptree top_level;
  for (const auto& [key, child] : tree) {
    if (sections.count(key)) continue;
    if (child.empty()) {
      top_level.put_child(pt::ptree::path_type(key, '\0'), child);
    } else {
      throw StageError("config", "unknown section [" + key + "]");
    }
  }
  auto section = [&](const std::string& name) {
    const auto child = tree.get_child_optional(pt::ptree::path_type(name, '\0'));
    return detail::Section(child ? &*child : nullptr, name);
  };

  detail::Section top(&top_level, "");
  top.integer("seed", cfg.selection.master_seed);
  top.integer("threads", cfg.threads);
  top.path("output", cfg.output, base_dir);
  if (auto f = top.text("format")) {
    try {
      cfg.format = parse_output_format(*f);
    } catch (const Error& e) {
      top.fail("format", e.what());
    }
  }
  top.check_unknown();

  auto corpus = section("corpus");
  corpus.path("path", cfg.corpus, base_dir);
  corpus.path("lexicon", cfg.lexicon, base_dir);
  corpus.integer("min_chars", cfg.segmentation.min_chars);
  if (auto mode = corpus.text("balance_mode")) {
    try {
      cfg.segmentation.balance_mode = parse_balance_mode(*mode);
    } catch (const Error& e) {
      corpus.fail("balance_mode", e.what());
    }
  }
  corpus.range("balance_range", cfg.segmentation.balance_range);
  corpus.check_unknown();

  auto labels = section("labels");
  labels.range("class_a", cfg.class_a);
  labels.range("class_b", cfg.class_b);
  labels.range("test", cfg.test);
  labels.check_unknown();

  auto features = section("features");
  features.integer("k_chars", cfg.k_chars);
  features.integer("k_words", cfg.k_words);
  features.check_unknown();

  auto selection = section("selection");
  selection.integer("repeats", cfg.selection.repeats);
  selection.real("modeling_fraction", cfg.selection.modeling_fraction);
  selection.integer("cv_runs", cfg.selection.cv_runs);
  selection.real("cv_fraction", cfg.selection.cv_fraction);
  selection.real("penalty_c", cfg.selection.penalty_c);
  selection.check_unknown();

  auto svm = section("svm");
  svm.real("c", cfg.selection.train.regularization_c);
  svm.real("tolerance", cfg.selection.train.tolerance);
  svm.integer("max_iterations", cfg.selection.train.max_iterations);
  svm.check_unknown();

  auto analysis = section("analysis");
  analysis.real("theta", cfg.theta);
  analysis.integer("min_side", cfg.min_side);
  analysis.integer("permutations", cfg.permutations);
  analysis.boolean("plots", cfg.plots);
  analysis.check_unknown();

  if (const auto groups = tree.get_child_optional("distance")) {
    for (const auto& [name, child] : *groups) {
      try {
        cfg.distance_groups.emplace_back(name, OrdinalRange::parse(detail::unquote(child.data())));
      } catch (const Error& e) {
        throw StageError("config", "[distance] " + name + ": " + e.what());
      }
    }
  }

  auto synth = section("synth");
  synth.integer("alphabet", cfg.synth.alphabet);
  synth.integer("shifted", cfg.synth.shifted);
  synth.real("factor", cfg.synth.factor);
  synth.real("zipf", cfg.synth.zipf);
  synth.integer("chars_per_chapter", cfg.synth.chars_per_chapter);
  synth.integer("chapters_a", cfg.synth.chapters_a);
  synth.integer("chapters_b", cfg.synth.chapters_b);
  if (auto t = synth.text("transition")) {
    try {
      cfg.synth.transition = parse_transition(*t);
    } catch (const Error& e) {
      synth.fail("transition", e.what());
    }
  }
  synth.real("sentence_end_probability", cfg.synth.sentence_end_probability);
  synth.real("exclamation_share", cfg.synth.exclamation_share);
  synth.real("quote_probability", cfg.synth.quote_probability);
  synth.path("output", cfg.synth.output, base_dir);
  synth.check_unknown();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw StageError("config", e.what());
  }
  return parse_config(text, std::filesystem::absolute(path).parent_path());
}

}  // namespace chronodivide
