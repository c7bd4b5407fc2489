#pragma once

// Domain types shared by every module: rubrics, evaluation records, judge
// verdicts, preference pairs and sampling settings. All types validate their
// invariants on construction and are immutable afterwards.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace glider {

/// Raised when a domain type is constructed with violated invariants.
/// `invariant()` names the rule that failed.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string invariant, const std::string& detail)
      : std::invalid_argument(invariant + ": " + detail), invariant_(std::move(invariant)) {}

  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

/// Value-or-error holder for fallible operations.
template <class T, class E>
class Result {
 public:
  Result(T value) : data_(std::in_place_index<0>, std::move(value)) {}
  Result(E error) : data_(std::in_place_index<1>, std::move(error)) {}

  bool has_value() const noexcept { return data_.index() == 0; }
  explicit operator bool() const noexcept { return has_value(); }

  const T& value() const& {
    if (!has_value()) throw std::logic_error("Result holds an error");
    return std::get<0>(data_);
  }
  T&& value() && {
    if (!has_value()) throw std::logic_error("Result holds an error");
    return std::get<0>(std::move(data_));
  }
  const E& error() const& {
    if (has_value()) throw std::logic_error("Result holds a value");
    return std::get<1>(data_);
  }

  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

 private:
  std::variant<T, E> data_;
};

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return lines;
}

// [A-Z][A-Z0-9_ ]*
inline bool is_tag_name(std::string_view s) {
  if (s.empty() || s.front() < 'A' || s.front() > 'Z') return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == ' ';
  });
}

// A line that is itself a bare `<TAG>` or `</TAG>`.
inline bool is_bare_tag_line(std::string_view line) {
  if (line.size() < 3 || line.front() != '<' || line.back() != '>') return false;
  auto inner = line.substr(1, line.size() - 2);
  if (!inner.empty() && inner.front() == '/') inner.remove_prefix(1);
  return is_tag_name(inner);
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

}  // namespace detail

enum class Scale { Binary, Likert3, Likert5 };

inline std::vector<int> scale_keys(Scale scale) {
  switch (scale) {
    case Scale::Binary: return {0, 1};
    case Scale::Likert3: return {1, 2, 3};
    case Scale::Likert5: return {1, 2, 3, 4, 5};
  }
  return {};
}

inline std::string_view scale_name(Scale scale) {
  switch (scale) {
    case Scale::Binary: return "binary";
    case Scale::Likert3: return "likert3";
    case Scale::Likert5: return "likert5";
  }
  return "";
}

inline std::optional<Scale> parse_scale(std::string_view name) {
  if (name == "binary") return Scale::Binary;
  if (name == "likert3") return Scale::Likert3;
  if (name == "likert5") return Scale::Likert5;
  return std::nullopt;
}

class Rubric {
 public:
  Rubric(Scale scale, std::map<int, std::string> descriptions)
      : scale_(scale), descriptions_(std::move(descriptions)) {
    std::vector<int> keys;
    for (const auto& [score, text] : descriptions_) keys.push_back(score);
    if (keys != scale_keys(scale_)) {
      throw ValidationError("rubric_keys_match_scale",
                            "scores do not match the " + std::string(scale_name(scale_)) + " scale");
    }
    for (const auto& [score, text] : descriptions_) {
      if (detail::trim(text).empty()) {
        throw ValidationError("rubric_description_non_empty",
                              "description for score " + std::to_string(score) + " is empty");
      }
    }
  }

  Scale scale() const noexcept { return scale_; }
  const std::map<int, std::string>& descriptions() const noexcept { return descriptions_; }
  bool contains(int score) const { return descriptions_.count(score) != 0; }
  std::vector<int> keys() const { return scale_keys(scale_); }

  friend bool operator==(const Rubric&, const Rubric&) = default;

 private:
  Scale scale_;
  std::map<int, std::string> descriptions_;
};

struct DataField {
  std::string tag;
  std::string body;

  friend bool operator==(const DataField&, const DataField&) = default;
};

using Metadata = std::map<std::string, std::string>;

class EvaluationRecord {
 public:
  EvaluationRecord(std::vector<DataField> data_fields, std::string pass_criteria, Rubric rubric,
                   Metadata metadata = {})
      : data_fields_(std::move(data_fields)),
        pass_criteria_(std::move(pass_criteria)),
        rubric_(std::move(rubric)),
        metadata_(std::move(metadata)) {
    if (data_fields_.empty()) {
      throw ValidationError("record_has_data_field", "a record needs at least one data field");
    }
    for (std::size_t i = 0; i < data_fields_.size(); ++i) {
      const auto& tag = data_fields_[i].tag;
      if (!detail::is_tag_name(tag)) {
        throw ValidationError("tag_name_format", "tag '" + tag + "' does not match [A-Z][A-Z0-9_ ]*");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (data_fields_[j].tag == tag) {
          throw ValidationError("tag_names_unique", "tag '" + tag + "' appears twice");
        }
      }
    }
    if (detail::trim(pass_criteria_).empty()) {
      throw ValidationError("pass_criteria_non_empty", "pass criteria are empty");
    }
  }

  const std::vector<DataField>& data_fields() const noexcept { return data_fields_; }
  const std::string& pass_criteria() const noexcept { return pass_criteria_; }
  const Rubric& rubric() const noexcept { return rubric_; }
  const Metadata& metadata() const noexcept { return metadata_; }

  std::string metadata_value(const std::string& key, std::string fallback = {}) const {
    auto it = metadata_.find(key);
    return it == metadata_.end() ? fallback : it->second;
  }

  /// Copy of this record with one metadata entry replaced.
  EvaluationRecord with_metadata(const std::string& key, std::string value) const {
    auto meta = metadata_;
    meta[key] = std::move(value);
    return EvaluationRecord(data_fields_, pass_criteria_, rubric_, std::move(meta));
  }

  /// True if `span` is a non-empty contiguous substring of some field body.
  bool contains_span(std::string_view span) const {
    if (span.empty()) return false;
    return std::any_of(data_fields_.begin(), data_fields_.end(),
                       [&](const DataField& f) { return f.body.find(span) != std::string::npos; });
  }

  friend bool operator==(const EvaluationRecord&, const EvaluationRecord&) = default;

 private:
  std::vector<DataField> data_fields_;
  std::string pass_criteria_;
  Rubric rubric_;
  Metadata metadata_;
};

/// Parsed judge output. Reasoning bullets are single trimmed lines without
/// the leading marker; highlights are verbatim spans.
class JudgeVerdict {
 public:
  JudgeVerdict(std::vector<std::string> reasoning, std::vector<std::string> highlights, int score)
      : reasoning_(std::move(reasoning)), highlights_(std::move(highlights)), score_(score) {
    if (reasoning_.empty()) {
      throw ValidationError("reasoning_non_empty", "verdict has no reasoning bullets");
    }
    for (const auto& bullet : reasoning_) {
      if (bullet.empty() || detail::trim(bullet).size() != bullet.size() ||
          bullet.find_first_of("\r\n") != std::string::npos) {
        throw ValidationError("reasoning_bullet_shape",
                              "bullets must be non-empty single trimmed lines");
      }
    }
    for (const auto& span : highlights_) {
      if (span.empty()) throw ValidationError("highlight_non_empty", "empty highlight span");
    }
  }

  const std::vector<std::string>& reasoning() const noexcept { return reasoning_; }
  const std::vector<std::string>& highlights() const noexcept { return highlights_; }
  int score() const noexcept { return score_; }

  /// Throws ValidationError unless the verdict is consistent with `record`.
  void check_against(const EvaluationRecord& record) const {
    if (!record.rubric().contains(score_)) {
      throw ValidationError("score_in_rubric",
                            "score " + std::to_string(score_) + " is not a rubric key");
    }
    for (const auto& span : highlights_) {
      if (!record.contains_span(span)) {
        throw ValidationError("highlight_in_data", "span '" + span + "' is not in the data fields");
      }
    }
  }

  JudgeVerdict with_highlights(std::vector<std::string> highlights) const {
    return JudgeVerdict(reasoning_, std::move(highlights), score_);
  }

  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;

 private:
  std::vector<std::string> reasoning_;
  std::vector<std::string> highlights_;
  int score_;
};

class PreferencePair {
 public:
  PreferencePair(EvaluationRecord record, JudgeVerdict chosen, JudgeVerdict rejected)
      : record_(std::move(record)), chosen_(std::move(chosen)), rejected_(std::move(rejected)) {
    chosen_.check_against(record_);
    rejected_.check_against(record_);
    if (chosen_.score() == rejected_.score() && chosen_.reasoning() == rejected_.reasoning()) {
      throw ValidationError("pair_differs", "chosen and rejected verdicts are identical");
    }
  }

  const EvaluationRecord& record() const noexcept { return record_; }
  const JudgeVerdict& chosen() const noexcept { return chosen_; }
  const JudgeVerdict& rejected() const noexcept { return rejected_; }

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;

 private:
  EvaluationRecord record_;
  JudgeVerdict chosen_;
  JudgeVerdict rejected_;
};

class SamplingConfig {
 public:
  SamplingConfig(double temperature, double top_p, int max_tokens,
                 std::optional<std::int64_t> seed = std::nullopt)
      : temperature_(temperature), top_p_(top_p), max_tokens_(max_tokens), seed_(seed) {
    if (!(temperature_ >= 0.0 && temperature_ <= 2.0)) {
      throw ValidationError("temperature_range", "temperature must lie in [0, 2]");
    }
    if (!(top_p_ > 0.0 && top_p_ <= 1.0)) {
      throw ValidationError("top_p_range", "top_p must lie in (0, 1]");
    }
    if (max_tokens_ <= 0) throw ValidationError("max_tokens_positive", "max_tokens must be positive");
  }

  /// Greedy decoding used for every judgment.
  static SamplingConfig judge(int max_tokens = 2048) { return SamplingConfig(0.0, 1.0, max_tokens); }

  double temperature() const noexcept { return temperature_; }
  double top_p() const noexcept { return top_p_; }
  int max_tokens() const noexcept { return max_tokens_; }
  const std::optional<std::int64_t>& seed() const noexcept { return seed_; }

  friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;

 private:
  double temperature_;
  double top_p_;
  int max_tokens_;
  std::optional<std::int64_t> seed_;
};

/// "<score>: <description>" lines in ascending score order.
inline std::string rubric_render(const Rubric& rubric) {
  std::string out;
  for (const auto& [score, text] : rubric.descriptions()) {
    if (!out.empty()) out += '\n';
    out += std::to_string(score);
    out += ": ";
    out += text;
  }
  return out;
}

/// Tag-wrapped data blocks separated by single blank lines.
inline std::string record_data_section(const EvaluationRecord& record) {
  std::string out;
  for (const auto& field : record.data_fields()) {
    if (!out.empty()) out += "\n\n";
    out += '<' + field.tag + ">\n" + field.body + "\n</" + field.tag + '>';
  }
  return out;
}

/// Inverse of record_data_section. Only exact when no body contains a line
/// that is itself a bare tag.
inline Result<std::vector<DataField>, std::string> parse_data_section(std::string_view text) {
  auto lines = detail::split_lines(text);
  std::vector<DataField> fields;
  std::size_t i = 0;
  while (i < lines.size()) {
    auto open = lines[i];
    if (!detail::is_bare_tag_line(open) || open[1] == '/') {
      return std::string("expected an opening tag at line ") + std::to_string(i + 1);
    }
    std::string tag(open.substr(1, open.size() - 2));
    std::string close = "</" + tag + ">";
    std::size_t j = i + 1;
    while (j < lines.size() && lines[j] != close) ++j;
    if (j == lines.size()) return "unterminated tag <" + tag + ">";
    std::string body;
    for (std::size_t k = i + 1; k < j; ++k) {
      if (k > i + 1) body += '\n';
      body += lines[k];
    }
    fields.push_back({std::move(tag), std::move(body)});
    i = j + 1;
    if (i < lines.size()) {
      if (!lines[i].empty()) return std::string("expected a blank line at line ") + std::to_string(i + 1);
      ++i;
      if (i == lines.size()) return std::string("trailing blank line");
    }
  }
  if (fields.empty()) return std::string("no data fields");
  return fields;
}

}  // namespace glider
