#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chronodivide/corpus.hpp"
#include "chronodivide/error.hpp"
#include "chronodivide/io.hpp"
#include "chronodivide/matrix.hpp"
#include "chronodivide/utf8.hpp"

namespace chronodivide {

/// Function characters and words: the content-independent candidates.
struct Lexicon {
  std::vector<char32_t> characters;
  std::vector<std::u32string> words;

  bool empty() const { return characters.empty() && words.empty(); }
};

/// One entry per line; single scalars are characters, longer entries words.
/// Lines starting with '#' are comments.
inline Lexicon parse_lexicon(std::string_view text) {
  Lexicon lexicon;
  std::set<char32_t> seen_chars;
  std::set<std::u32string> seen_words;
  std::istringstream lines{std::string(text)};
  std::string line;
  while (std::getline(lines, line)) {
    const auto entry = detail::trim(line);
    if (entry.empty() || entry.front() == '#') continue;
    const auto decoded = utf8::try_decode(entry);
    if (!decoded) throw Error("lexicon entry is not valid UTF-8");
    if (decoded->size() == 1) {
      if (seen_chars.insert(decoded->front()).second) lexicon.characters.push_back(decoded->front());
    } else if (seen_words.insert(*decoded).second) {
      lexicon.words.push_back(*decoded);
    }
  }
  return lexicon;
}

inline Lexicon load_lexicon(const std::filesystem::path& path) {
  std::string text = io::read_file(path);
  if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);
  return parse_lexicon(text);
}

inline constexpr std::array<std::string_view, 4> kGlobalFeatureNames = {
    "sentence_len_mean", "sentence_len_var", "direct_speech_rate", "exclamation_rate"};

/// The n characters, m words and 4 global features, in column order.
struct FeatureSpec {
  std::vector<char32_t> char_features;
  std::vector<std::u32string> word_features;

  std::size_t total_dim() const {
    return char_features.size() + word_features.size() + kGlobalFeatureNames.size();
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(total_dim());
    for (char32_t c : char_features) out.push_back(utf8::encode(std::u32string(1, c)));
    for (const auto& w : word_features) out.push_back(utf8::encode(w));
    for (auto g : kGlobalFeatureNames) out.emplace_back(g);
    return out;
  }

  /// Rebuilds a spec from column names (the inverse of names()).
  static FeatureSpec from_names(const std::vector<std::string>& names) {
    const auto globals = kGlobalFeatureNames.size();
    if (names.size() < globals ||
        !std::equal(kGlobalFeatureNames.begin(), kGlobalFeatureNames.end(),
                    names.end() - static_cast<std::ptrdiff_t>(globals))) {
      throw Error("feature names must end with the four global features");
    }
    FeatureSpec spec;
    for (std::size_t i = 0; i + globals < names.size(); ++i) {
      const auto decoded = utf8::decode(names[i]);
      if (decoded.empty()) throw Error("empty feature name");
      if (decoded.size() == 1) {
        if (!spec.word_features.empty()) throw Error("character features must precede words");
        spec.char_features.push_back(decoded.front());
      } else {
        spec.word_features.push_back(decoded);
      }
    }
    return spec;
  }

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

/// Non-overlapping occurrences found by one left-to-right scan.
inline std::size_t count_word_occurrences(std::u32string_view text, std::u32string_view word) {
  if (word.empty()) throw Error("word must not be empty");
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(word, pos)) != std::u32string_view::npos) {
    ++count;
    pos += word.size();
  }
  return count;
}

/// Keeps the lexicon entries that are among the most frequent characters
/// (k_chars) and most frequent lexicon words (k_words) of the samples.
/// Descending frequency; ties by code point order.
inline FeatureSpec build_vocabulary(std::span<const Sample> samples, const Lexicon& lexicon,
                                    std::size_t k_chars = 500, std::size_t k_words = 300) {
  if (lexicon.empty()) throw Error("function lexicon is empty");
  if (k_chars < 1 || k_words < 1) throw Error("k_chars and k_words must be at least 1");

  std::vector<std::u32string> texts;
  texts.reserve(samples.size());
  for (const auto& s : samples) texts.push_back(utf8::decode(s.text));

  std::unordered_map<char32_t, std::size_t> char_counts;
  for (const auto& t : texts) {
    for (char32_t c : t) {
      if (!utf8::is_space(c)) ++char_counts[c];
    }
  }
  std::vector<std::pair<char32_t, std::size_t>> chars(char_counts.begin(), char_counts.end());
  std::sort(chars.begin(), chars.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (chars.size() > k_chars) chars.resize(k_chars);

  FeatureSpec spec;
  const std::set<char32_t> lexicon_chars(lexicon.characters.begin(), lexicon.characters.end());
  for (const auto& [c, count] : chars) {
    if (lexicon_chars.contains(c)) spec.char_features.push_back(c);
  }

  std::vector<std::pair<std::u32string, std::size_t>> words;
  for (const auto& w : lexicon.words) {
    std::size_t count = 0;
    for (const auto& t : texts) count += count_word_occurrences(t, w);
    if (count > 0) words.emplace_back(w, count);
  }
  std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (words.size() > k_words) words.resize(k_words);
  for (auto& [w, count] : words) spec.word_features.push_back(std::move(w));

  if (spec.char_features.empty() && spec.word_features.empty()) {
    throw Error("no lexicon character or word occurs among the most frequent corpus entries");
  }
  return spec;
}

namespace detail {

inline char32_t closing_quote_for(char32_t opener) {
  switch (opener) {
    case U'「': return U'」';
    case U'『': return U'』';
    case U'“': return U'”';
    case U'"': return U'"';
    default: return 0;
  }
}

}  // namespace detail

/// Counts top-level quoted segments delimited by 「」, 『』, “” or "".
/// An opening quote without a closer counts as one segment running to the
/// end of the text and sets `unmatched`.
inline std::size_t count_quoted_segments(std::u32string_view text, bool* unmatched = nullptr) {
  std::vector<char32_t> expected;  // stack of closers
  std::size_t segments = 0;
  for (char32_t c : text) {
    if (!expected.empty() && c == expected.back()) {
      expected.pop_back();
      continue;
    }
    if (const char32_t closer = detail::closing_quote_for(c)) {
      if (expected.empty()) ++segments;
      expected.push_back(closer);
    }
  }
  if (unmatched) *unmatched = !expected.empty();
  return segments;
}

/// Raw feature vector: per-1000-character rates for characters and words,
/// population mean/variance of sentence length, and per-100-sentence rates of
/// quoted segments and exclamatory sentences.
inline std::vector<double> extract_features(const Sample& sample, const FeatureSpec& spec,
                                            std::vector<std::string>* warnings = nullptr) {
  const std::u32string text = utf8::decode(sample.text);
  const std::size_t length = text_length(std::u32string_view(text));
  if (length == 0) throw Error("sample '" + sample.id + "' has no text");

  std::vector<double> values(spec.total_dim(), 0.0);
  const double per_thousand = 1000.0 / static_cast<double>(length);

  std::unordered_map<char32_t, std::size_t> char_column;
  for (std::size_t i = 0; i < spec.char_features.size(); ++i) char_column[spec.char_features[i]] = i;
  std::vector<std::size_t> char_counts(spec.char_features.size(), 0);
  for (char32_t c : text) {
    if (const auto it = char_column.find(c); it != char_column.end()) ++char_counts[it->second];
  }
  for (std::size_t i = 0; i < char_counts.size(); ++i) {
    values[i] = static_cast<double>(char_counts[i]) * per_thousand;
  }
  const std::size_t word_offset = spec.char_features.size();
  for (std::size_t j = 0; j < spec.word_features.size(); ++j) {
    values[word_offset + j] =
        static_cast<double>(count_word_occurrences(text, spec.word_features[j])) * per_thousand;
  }

  const std::size_t global = word_offset + spec.word_features.size();
  const auto sentences = split_sentences(std::u32string_view(text));
  if (sentences.empty()) {
    if (warnings) warnings->push_back("sample '" + sample.id + "' has no sentences");
    return values;
  }
  double sum = 0.0;
  std::size_t exclamations = 0;
  for (const auto& s : sentences) {
    sum += static_cast<double>(sentence_length(s));
    auto last = std::find_if(s.rbegin(), s.rend(), [](char32_t c) { return detail::is_terminator(c); });
    if (last != s.rend() && (*last == U'！' || *last == U'!')) ++exclamations;
  }
  const double count = static_cast<double>(sentences.size());
  const double mean = sum / count;
  double var = 0.0;
  for (const auto& s : sentences) {
    const double d = static_cast<double>(sentence_length(s)) - mean;
    var += d * d;
  }
  bool unmatched = false;
  const std::size_t quotes = count_quoted_segments(text, &unmatched);
  if (unmatched && warnings) {
    warnings->push_back("sample '" + sample.id + "' has an unmatched opening quote");
  }
  values[global + 0] = mean;
  values[global + 1] = var / count;
  values[global + 2] = static_cast<double>(quotes) * 100.0 / count;
  values[global + 3] = static_cast<double>(exclamations) * 100.0 / count;
  return values;
}

struct RowInfo {
  std::string sample_id;
  std::size_t ordinal = 0;
  std::size_t document_ordinal = 0;
  ClassTag class_tag = ClassTag::Unlabeled;
  friend bool operator==(const RowInfo&, const RowInfo&) = default;
};

/// Samples (rows, chronological) by features (columns, FeatureSpec order).
struct FeatureMatrix {
  std::vector<std::string> feature_names;
  std::vector<RowInfo> rows;
  DenseMatrix values;

  /// Rows tagged A or B.
  std::vector<std::size_t> training_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].class_tag != ClassTag::Unlabeled) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> unlabeled_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].class_tag == ClassTag::Unlabeled) out.push_back(i);
    }
    return out;
  }

  /// +1 for class A and -1 for class B, for the given rows.
  std::vector<int> labels(std::span<const std::size_t> row_indices) const {
    std::vector<int> y;
    y.reserve(row_indices.size());
    for (auto r : row_indices) {
      if (rows[r].class_tag == ClassTag::Unlabeled) throw Error("row '" + rows[r].sample_id + "' is unlabeled");
      y.push_back(rows[r].class_tag == ClassTag::A ? 1 : -1);
    }
    return y;
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

inline FeatureMatrix build_feature_matrix(std::span<const Sample> samples, const FeatureSpec& spec,
                                          std::vector<std::string>* warnings = nullptr) {
  FeatureMatrix matrix;
  matrix.feature_names = spec.names();
  matrix.values = DenseMatrix(0, spec.total_dim());
  for (const auto& sample : samples) {
    matrix.rows.push_back({sample.id, sample.ordinal, sample.document_ordinal, sample.class_tag});
    matrix.values.append_row(extract_features(sample, spec, warnings));
  }
  return matrix;
}

inline std::string feature_matrix_csv(const FeatureMatrix& matrix) {
  std::vector<std::string> header = {"sample_id", "ordinal", "document_ordinal", "class_tag"};
  header.insert(header.end(), matrix.feature_names.begin(), matrix.feature_names.end());
  std::string out = io::csv_line(header);
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    std::vector<std::string> fields = {matrix.rows[r].sample_id, std::to_string(matrix.rows[r].ordinal),
                                       std::to_string(matrix.rows[r].document_ordinal),
                                       std::string(to_string(matrix.rows[r].class_tag))};
    for (double v : matrix.values.row(r)) fields.push_back(io::format_double(v));
    out += io::csv_line(fields);
  }
  return out;
}

namespace detail {

inline std::size_t parse_index(const std::string& text) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw Error("'" + text + "' is not an index");
  return value;
}

}  // namespace detail

inline FeatureMatrix parse_feature_matrix_csv(std::string_view text) {
  const auto records = io::parse_csv(text);
  if (records.empty()) throw Error("feature CSV is empty");
  const auto& header = records.front();
  if (header.size() < 4 || header[0] != "sample_id" || header[1] != "ordinal" || header[2] != "document_ordinal" ||
      header[3] != "class_tag") {
    throw Error("feature CSV header must start with sample_id,ordinal,document_ordinal,class_tag");
  }
  FeatureMatrix matrix;
  matrix.feature_names.assign(header.begin() + 4, header.end());
  matrix.values = DenseMatrix(0, matrix.feature_names.size());
  std::vector<double> row(matrix.feature_names.size());
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.size() != header.size()) {
      throw Error("feature CSV row " + std::to_string(i) + " has " + std::to_string(rec.size()) +
                  " fields, expected " + std::to_string(header.size()));
    }
    matrix.rows.push_back({rec[0], detail::parse_index(rec[1]), detail::parse_index(rec[2]), parse_class_tag(rec[3])});
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = io::parse_double(rec[c + 4]);
    matrix.values.append_row(row);
  }
  return matrix;
}

struct MedianSubstitution {
  std::size_t feature = 0;
  double divisor = 1.0;
  bool column_all_zero = false;
};

/// Per-feature divisors that bring the training median to 1.
struct Normalizer {
  std::vector<double> medians;
  std::vector<MedianSubstitution> substitutions;
};

/// Lower median per column over the training rows. A zero median is replaced
/// by the smallest positive training value of the column, or by 1 when the
/// column is entirely zero.
inline Normalizer fit_normalizer(const DenseMatrix& raw, std::span<const std::size_t> training_rows) {
  if (training_rows.empty()) throw Error("normalizer needs at least one training row");
  Normalizer norm;
  norm.medians.resize(raw.cols());
  std::vector<double> column(training_rows.size());
  for (std::size_t c = 0; c < raw.cols(); ++c) {
    for (std::size_t i = 0; i < training_rows.size(); ++i) column[i] = raw(training_rows[i], c);
    std::sort(column.begin(), column.end());
    double median = column[(column.size() - 1) / 2];
    if (median <= 0.0) {
      const auto positive = std::find_if(column.begin(), column.end(), [](double v) { return v > 0.0; });
      MedianSubstitution sub{c, 1.0, positive == column.end()};
      if (positive != column.end()) sub.divisor = *positive;
      median = sub.divisor;
      norm.substitutions.push_back(sub);
    }
    norm.medians[c] = median;
  }
  return norm;
}

inline DenseMatrix apply_normalizer(const DenseMatrix& raw, const Normalizer& norm) {
  if (raw.cols() != norm.medians.size()) {
    throw Error("normalizer has " + std::to_string(norm.medians.size()) + " features, matrix has " +
                std::to_string(raw.cols()));
  }
  DenseMatrix out = raw;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] /= norm.medians[c];
  }
  return out;
}

inline FeatureMatrix apply_normalizer(const FeatureMatrix& raw, const Normalizer& norm) {
  FeatureMatrix out = raw;
  out.values = apply_normalizer(raw.values, norm);
  return out;
}

}  // namespace chronodivide
