#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "chronodivide/error.hpp"
#include "chronodivide/io.hpp"
#include "chronodivide/utf8.hpp"

namespace chronodivide {

struct Document {
  std::string id;
  std::size_t ordinal = 0;
  std::string text;  // UTF-8
};

enum class ClassTag { A, B, Unlabeled };

inline std::string_view to_string(ClassTag tag) {
  switch (tag) {
    case ClassTag::A: return "A";
    case ClassTag::B: return "B";
    default: return "unlabeled";
  }
}

inline ClassTag parse_class_tag(std::string_view s) {
  if (s == "A") return ClassTag::A;
  if (s == "B") return ClassTag::B;
  if (s == "unlabeled" || s.empty()) return ClassTag::Unlabeled;
  throw Error("unknown class tag '" + std::string(s) + "'");
}

struct Sample {
  std::string id;
  std::size_t ordinal = 0;
  std::string source_document;
  std::size_t document_ordinal = 0;
  std::size_t part_index = 0;
  ClassTag class_tag = ClassTag::Unlabeled;
  std::string text;  // UTF-8
};

/// Closed interval of ordinals, written "first..last".
struct OrdinalRange {
  std::size_t first = 0;
  std::size_t last = 0;

  bool contains(std::size_t ordinal) const { return ordinal >= first && ordinal <= last; }
  bool overlaps(const OrdinalRange& other) const {
    return first <= other.last && other.first <= last;
  }
  std::size_t size() const { return last - first + 1; }

  static OrdinalRange parse(std::string_view text) {
    const auto dots = text.find("..");
    auto parse_number = [&](std::string_view part) {
      while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
      while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
      std::size_t value = 0;
      const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
      if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size()) {
        throw Error("malformed ordinal range '" + std::string(text) + "'");
      }
      return value;
    };
    OrdinalRange range;
    if (dots == std::string_view::npos) {
      range.first = range.last = parse_number(text);
    } else {
      range.first = parse_number(text.substr(0, dots));
      range.last = parse_number(text.substr(dots + 2));
    }
    if (range.last < range.first) {
      throw Error("ordinal range '" + std::string(text) + "' is empty");
    }
    return range;
  }

  std::string str() const { return std::to_string(first) + ".." + std::to_string(last); }
  friend bool operator==(const OrdinalRange&, const OrdinalRange&) = default;
};

enum class BalanceMode { None, SplitHalves, Duplicate };

inline BalanceMode parse_balance_mode(std::string_view s) {
  if (s == "none") return BalanceMode::None;
  if (s == "split_halves") return BalanceMode::SplitHalves;
  if (s == "duplicate") return BalanceMode::Duplicate;
  throw Error("unknown balance mode '" + std::string(s) + "'");
}

inline std::string_view to_string(BalanceMode mode) {
  switch (mode) {
    case BalanceMode::SplitHalves: return "split_halves";
    case BalanceMode::Duplicate: return "duplicate";
    default: return "none";
  }
}

struct SegmentationPolicy {
  std::size_t min_chars = 1000;
  BalanceMode balance_mode = BalanceMode::None;
  std::optional<OrdinalRange> balance_range;
};

struct LabelRange {
  OrdinalRange range;
  ClassTag tag = ClassTag::Unlabeled;
};

struct Segmentation {
  std::vector<Sample> samples;
  std::vector<std::string> warnings;
  bool short_document = false;  // some whole document fell below min_chars
};

namespace detail {

inline Document load_document(const std::filesystem::path& path, std::size_t ordinal) {
  std::string text = io::read_file(path);
  if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);
  const auto decoded = utf8::try_decode(text);
  if (!decoded) throw Error("'" + path.string() + "' is not valid UTF-8");
  if (std::all_of(decoded->begin(), decoded->end(), utf8::is_space)) {
    throw Error("'" + path.string() + "' is empty");
  }
  return Document{path.stem().string(), ordinal, std::move(text)};
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline bool is_terminator(char32_t cp) {
  switch (cp) {
    case U'。': case U'！': case U'？': case U'；': case U'…':
    case U'.': case U'!': case U'?': case U';':
      return true;
    default:
      return false;
  }
}

inline bool is_closing_quote(char32_t cp) {
  return cp == U'」' || cp == U'』' || cp == U'”';
}

}  // namespace detail

/// Loads a corpus from a directory of .txt files (lexicographic filename
/// order) or from a manifest listing one relative path per line.
inline std::vector<Document> load_corpus(const std::filesystem::path& locator) {
  namespace fs = std::filesystem;
  if (!fs::exists(locator)) throw Error("corpus locator '" + locator.string() + "' does not exist");

  std::vector<fs::path> files;
  if (fs::is_directory(locator)) {
    for (const auto& entry : fs::directory_iterator(locator)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
      return a.filename().string() < b.filename().string();
    });
  } else {
    const std::string manifest = io::read_file(locator);
    std::istringstream lines(manifest);
    std::set<std::string> seen;
    std::string line;
    while (std::getline(lines, line)) {
      const auto entry = detail::trim(line);
      if (entry.empty() || entry.front() == '#') continue;
      const fs::path path = (locator.parent_path() / fs::path(std::string(entry))).lexically_normal();
      if (!seen.insert(path.string()).second) {
        throw Error("duplicate file '" + std::string(entry) + "' in manifest");
      }
      files.push_back(path);
    }
  }
  if (files.empty()) throw Error("empty corpus");

  std::vector<Document> documents;
  documents.reserve(files.size());
  for (const auto& file : files) {
    documents.push_back(detail::load_document(file, documents.size()));
  }
  return documents;
}

/// Number of non-whitespace scalar values; the unit of every length and
/// per-character rate in this library.
inline std::size_t text_length(std::u32string_view text) {
  return static_cast<std::size_t>(
      std::count_if(text.begin(), text.end(), [](char32_t c) { return !utf8::is_space(c); }));
}

inline std::size_t text_length(std::string_view utf8_text) {
  return text_length(utf8::decode(utf8_text));
}

/// Splits at runs of sentence terminators (CJK 。！？；… and ASCII . ! ? ;).
/// Closing quotes that directly follow a terminator run stay with the
/// sentence they close. A trailing unterminated run is a sentence of its own
/// unless it is pure whitespace. Concatenating the result reproduces the
/// input up to trailing whitespace.
inline std::vector<std::u32string> split_sentences(std::u32string_view text) {
  std::vector<std::u32string> sentences;
  std::size_t start = 0;
  std::size_t i = 0;
  const auto n = text.size();
  while (i < n) {
    if (!detail::is_terminator(text[i])) {
      ++i;
      continue;
    }
    while (i < n && detail::is_terminator(text[i])) ++i;
    while (i < n && detail::is_closing_quote(text[i])) ++i;
    sentences.emplace_back(text.substr(start, i - start));
    start = i;
  }
  if (start < n) {
    const auto rest = text.substr(start);
    if (!std::all_of(rest.begin(), rest.end(), utf8::is_space)) sentences.emplace_back(rest);
  }
  return sentences;
}

inline std::vector<std::string> split_sentences(std::string_view utf8_text) {
  std::vector<std::string> out;
  for (const auto& s : split_sentences(std::u32string_view(utf8::decode(utf8_text)))) {
    out.push_back(utf8::encode(s));
  }
  return out;
}

/// Sentence length excluding terminators and whitespace.
inline std::size_t sentence_length(std::u32string_view sentence) {
  return static_cast<std::size_t>(std::count_if(sentence.begin(), sentence.end(), [](char32_t c) {
    return !detail::is_terminator(c) && !utf8::is_space(c);
  }));
}

namespace detail {

/// Splits a document into two parts at the sentence boundary closest to its
/// character midpoint (earlier boundary on ties). Falls back to the exact
/// character midpoint when the text is a single sentence.
inline std::pair<std::string, std::string> split_at_midpoint(const std::string& text) {
  const std::u32string decoded = utf8::decode(text);
  const auto sentences = split_sentences(std::u32string_view(decoded));
  const std::size_t total = text_length(std::u32string_view(decoded));
  const double midpoint = static_cast<double>(total) / 2.0;

  std::size_t best_offset = 0;  // in scalar values of `decoded`
  double best_distance = -1.0;
  std::size_t offset = 0;
  std::size_t chars = 0;
  for (std::size_t s = 0; s + 1 < sentences.size(); ++s) {
    offset += sentences[s].size();
    chars += text_length(std::u32string_view(sentences[s]));
    const double distance = std::abs(static_cast<double>(chars) - midpoint);
    if (best_distance < 0.0 || distance < best_distance) {
      best_distance = distance;
      best_offset = offset;
    }
  }
  if (best_distance < 0.0) {
    std::size_t seen = 0;
    for (best_offset = 0; best_offset < decoded.size(); ++best_offset) {
      if (utf8::is_space(decoded[best_offset])) continue;
      if (seen == total / 2) break;
      ++seen;
    }
  }
  const auto view = std::u32string_view(decoded);
  return {utf8::encode(view.substr(0, best_offset)), utf8::encode(view.substr(best_offset))};
}

}  // namespace detail

/// Orders documents into samples, applies the balancing policy and tags
/// samples with their class. Label ranges are in document ordinals.
inline Segmentation segment_samples(const std::vector<Document>& documents,
                                    const SegmentationPolicy& policy,
                                    const std::vector<LabelRange>& labels) {
  if (policy.min_chars < 1) throw Error("min_chars must be at least 1");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      if (labels[i].range.overlaps(labels[j].range)) {
        throw Error("label ranges " + labels[i].range.str() + " and " + labels[j].range.str() +
                    " overlap");
      }
    }
  }
  if (policy.balance_mode != BalanceMode::None) {
    if (!policy.balance_range) throw Error("balance mode requires a balance range");
    if (policy.balance_range->last >= documents.size()) {
      throw Error("balance range " + policy.balance_range->str() + " exceeds corpus of " +
                  std::to_string(documents.size()) + " documents");
    }
  }

  Segmentation result;
  auto tag_for = [&](std::size_t ordinal) {
    for (const auto& label : labels) {
      if (label.range.contains(ordinal)) return label.tag;
    }
    return ClassTag::Unlabeled;
  };
  auto emit = [&](const Document& doc, std::size_t part, std::string text, bool multi) {
    Sample sample;
    sample.id = multi ? doc.id + "#" + std::to_string(part) : doc.id;
    sample.ordinal = result.samples.size();
    sample.source_document = doc.id;
    sample.document_ordinal = doc.ordinal;
    sample.part_index = part;
    sample.class_tag = tag_for(doc.ordinal);
    sample.text = std::move(text);
    result.samples.push_back(std::move(sample));
  };

  for (const auto& doc : documents) {
    const std::size_t length = text_length(std::string_view(doc.text));
    const bool balanced = policy.balance_mode != BalanceMode::None &&
                          policy.balance_range->contains(doc.ordinal);
    if (balanced && policy.balance_mode == BalanceMode::SplitHalves) {
      if (length < 2 * policy.min_chars) {
        throw Error("document '" + doc.id + "' has " + std::to_string(length) +
                    " characters, fewer than 2*min_chars needed to split it");
      }
      auto [first, second] = detail::split_at_midpoint(doc.text);
      for (const auto* part : {&first, &second}) {
        const auto part_length = text_length(std::string_view(*part));
        if (part_length < policy.min_chars) {
          result.warnings.push_back("half of document '" + doc.id + "' has only " +
                                    std::to_string(part_length) + " characters");
        }
      }
      emit(doc, 0, std::move(first), true);
      emit(doc, 1, std::move(second), true);
      continue;
    }
    if (length < policy.min_chars) {
      result.short_document = true;
      result.warnings.push_back("document '" + doc.id + "' has " + std::to_string(length) +
                                " characters, fewer than min_chars=" +
                                std::to_string(policy.min_chars));
    }
    if (balanced) {  // duplicate
      emit(doc, 0, doc.text, true);
      emit(doc, 1, doc.text, true);
    } else {
      emit(doc, 0, doc.text, false);
    }
  }
  return result;
}

}  // namespace chronodivide
