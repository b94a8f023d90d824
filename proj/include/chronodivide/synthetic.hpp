#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "chronodivide/error.hpp"
#include "chronodivide/io.hpp"
#include "chronodivide/rng.hpp"
#include "chronodivide/utf8.hpp"

namespace chronodivide {

enum class Transition { Step, Linear };

inline Transition parse_transition(std::string_view s) {
  if (s == "step") return Transition::Step;
  if (s == "linear") return Transition::Linear;
  throw Error("unknown transition '" + std::string(s) + "' (expected step or linear)");
}

inline std::string_view to_string(Transition t) { return t == Transition::Step ? "step" : "linear"; }

/// Two-author corpus of i.i.d. symbols. Step: chapters before the divide
/// draw from A, the rest from B. Linear: the mixture weight of B rises from
/// 0 at the first chapter to 1 at the last.
struct SyntheticSpec {
  std::vector<double> distribution_a;
  std::vector<double> distribution_b;
  std::size_t chars_per_chapter = 3000;
  std::size_t chapters_a = 80;
  std::size_t chapters_b = 40;
  Transition transition = Transition::Step;
  double sentence_end_probability = 0.05;  // per emitted symbol
  double exclamation_share = 0.1;          // of sentence terminators
  double quote_probability = 0.1;          // per sentence
  std::vector<std::size_t> shifted_symbols;  // informational, echoed into truth.json
  std::uint64_t seed = 0;

  std::size_t alphabet_size() const { return distribution_a.size(); }
  std::size_t chapters() const { return chapters_a + chapters_b; }

  void validate() const {
    if (distribution_a.empty()) throw Error("synthetic alphabet is empty");
    if (distribution_a.size() != distribution_b.size()) throw Error("synthetic distributions differ in size");
    if (distribution_a.size() > 20000) throw Error("synthetic alphabet is larger than 20000 symbols");
    for (const auto* dist : {&distribution_a, &distribution_b}) {
      double sum = 0.0;
      for (double p : *dist) {
        if (!(p >= 0.0)) throw Error("synthetic probabilities must be non-negative");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw Error("synthetic distribution does not sum to 1");
    }
    if (chapters_a < 1 || chapters_b < 1) throw Error("synthetic chapter counts must be at least 1");
    if (chars_per_chapter < 2) throw Error("chars_per_chapter must be at least 2");
    if (!(sentence_end_probability > 0.0 && sentence_end_probability < 1.0)) {
      throw Error("sentence_end_probability must lie in (0, 1)");
    }
    if (!(exclamation_share >= 0.0 && exclamation_share <= 1.0)) throw Error("exclamation_share must lie in [0, 1]");
    if (!(quote_probability >= 0.0 && quote_probability <= 1.0)) throw Error("quote_probability must lie in [0, 1]");
  }
};

/// Symbol i of the alphabet: consecutive CJK ideographs from U+4E00.
inline char32_t synthetic_symbol(std::size_t i) { return static_cast<char32_t>(0x4E00 + i); }

/// Base distribution p_i ∝ (i+1)^-zipf; B multiplies `shifted` evenly spaced
/// symbols by `factor` and renormalizes. factor = 1 gives A = B.
inline SyntheticSpec planted_spec(std::size_t alphabet, std::size_t shifted, double factor, double zipf = 0.0) {
  if (alphabet < 1) throw Error("alphabet must be at least 1");
  if (shifted > alphabet) throw Error("cannot shift more symbols than the alphabet holds");
  if (!(factor > 0.0)) throw Error("shift factor must be positive");
  SyntheticSpec spec;
  spec.distribution_a.resize(alphabet);
  for (std::size_t i = 0; i < alphabet; ++i) spec.distribution_a[i] = std::pow(static_cast<double>(i + 1), -zipf);
  spec.distribution_b = spec.distribution_a;
  for (std::size_t k = 0; k < shifted; ++k) {
    const std::size_t symbol = k * alphabet / shifted;
    spec.shifted_symbols.push_back(symbol);
    spec.distribution_b[symbol] *= factor;
  }
  for (auto* dist : {&spec.distribution_a, &spec.distribution_b}) {
    double sum = 0.0;
    for (double p : *dist) sum += p;
    for (double& p : *dist) p /= sum;
  }
  return spec;
}

namespace detail {

inline std::vector<double> cumulative(const std::vector<double>& p) {
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) cdf[i] = acc += p[i];
  cdf.back() = 1.0;
  return cdf;
}

inline std::size_t draw(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

/// chars_per_chapter non-whitespace scalars, terminators included. Quoted
/// sentences are wrapped in 「」 and the quotes count toward the length.
inline std::string chapter_text(const SyntheticSpec& spec, const std::vector<double>& cdf, Rng& rng) {
  std::string text;
  std::size_t written = 0;
  std::size_t sentences = 0;
  const std::size_t budget = spec.chars_per_chapter;
  while (written < budget) {
    const bool quoted = budget - written >= 5 && rng.uniform() < spec.quote_probability;
    const std::size_t reserve = quoted ? 3 : 1;  // closing quote plus terminator
    if (quoted) {
      utf8::append(text, U'「');
      ++written;
    }
    std::size_t body = 0;
    while (written + reserve < budget) {
      utf8::append(text, synthetic_symbol(draw(cdf, rng)));
      ++written;
      ++body;
      if (rng.uniform() < spec.sentence_end_probability) break;
    }
    if (body == 0 && budget - written > reserve) {
      utf8::append(text, synthetic_symbol(draw(cdf, rng)));
      ++written;
    }
    utf8::append(text, rng.uniform() < spec.exclamation_share ? U'！' : U'。');
    ++written;
    if (quoted) {
      utf8::append(text, U'」');
      ++written;
    }
    if (++sentences % 8 == 0) text += '\n';
  }
  if (text.empty() || text.back() != '\n') text += '\n';
  return text;
}

}  // namespace detail

struct SyntheticCorpus {
  std::filesystem::path chapters_dir;
  std::filesystem::path lexicon_path;
  std::filesystem::path truth_path;
  nlohmann::json truth;
};

/// Writes chapters/chapter_NNNN.txt, lexicon.txt (the alphabet) and
/// truth.json under `out`. Chapter i uses its own seeded stream.
inline SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out) {
  spec.validate();
  SyntheticCorpus corpus;
  corpus.chapters_dir = out / "chapters";
  corpus.lexicon_path = out / "lexicon.txt";
  corpus.truth_path = out / "truth.json";
  std::error_code ec;
  std::filesystem::create_directories(corpus.chapters_dir, ec);
  if (ec) throw Error("cannot create output directory '" + corpus.chapters_dir.string() + "': " + ec.message());

  const auto cdf_a = detail::cumulative(spec.distribution_a);
  const auto cdf_b = detail::cumulative(spec.distribution_b);
  const std::size_t total = spec.chapters();
  for (std::size_t i = 0; i < total; ++i) {
    Rng rng(derive_seed(spec.seed, "chapter", i));
    std::string text;
    if (spec.transition == Transition::Step) {
      text = detail::chapter_text(spec, i < spec.chapters_a ? cdf_a : cdf_b, rng);
    } else {
      const double t = total > 1 ? static_cast<double>(i) / static_cast<double>(total - 1) : 0.0;
      std::vector<double> mix(spec.alphabet_size());
      for (std::size_t s = 0; s < mix.size(); ++s) {
        mix[s] = (1.0 - t) * spec.distribution_a[s] + t * spec.distribution_b[s];
      }
      text = detail::chapter_text(spec, detail::cumulative(mix), rng);
    }
    char name[48];
    std::snprintf(name, sizeof name, "chapter_%04zu.txt", i);
    io::write_file(corpus.chapters_dir / name, text);
  }

  std::string lexicon;
  for (std::size_t s = 0; s < spec.alphabet_size(); ++s) {
    utf8::append(lexicon, synthetic_symbol(s));
    lexicon += '\n';
  }
  io::write_file(corpus.lexicon_path, lexicon);

  const bool identical = spec.distribution_a == spec.distribution_b;
  nlohmann::json truth;
  truth["chapters"] = total;
  truth["chapters_a"] = spec.chapters_a;
  truth["chapters_b"] = spec.chapters_b;
  truth["transition"] = to_string(spec.transition);
  truth["identical_distributions"] = identical;
  truth["divide_after_document"] =
      spec.transition == Transition::Step && !identical ? nlohmann::json(spec.chapters_a - 1) : nlohmann::json(nullptr);
  truth["shifted_symbols"] = nlohmann::json::array();
  for (auto s : spec.shifted_symbols) {
    truth["shifted_symbols"].push_back({{"index", s}, {"symbol", utf8::encode(std::u32string(1, synthetic_symbol(s)))},
                                        {"p_a", spec.distribution_a[s]}, {"p_b", spec.distribution_b[s]}});
  }
  truth["chars_per_chapter"] = spec.chars_per_chapter;
  truth["seed"] = spec.seed;
  io::write_file(corpus.truth_path, truth.dump(2) + "\n");
  corpus.truth = std::move(truth);
  return corpus;
}

}  // namespace chronodivide
