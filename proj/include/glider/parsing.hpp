#pragma once

// Judge output parsing: extracts <reasoning>, <highlight> and <score> from raw
// model text and validates the result against the record being judged.
// Input handling is tolerant (tag case, spacing inside brackets, order);
// render_verdict always emits the canonical form.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "glider/core.hpp"
#include "glider/json_io.hpp"

namespace glider {

enum class ParseFailureKind {
  MissingTag,
  DuplicateTag,
  MalformedHighlightList,
  NonIntegerScore,
  ScoreOutOfRange,
  EmptyReasoning,
  HighlightNotInData,
};

inline std::string_view to_string(ParseFailureKind kind) {
  switch (kind) {
    case ParseFailureKind::MissingTag: return "MissingTag";
    case ParseFailureKind::DuplicateTag: return "DuplicateTag";
    case ParseFailureKind::MalformedHighlightList: return "MalformedHighlightList";
    case ParseFailureKind::NonIntegerScore: return "NonIntegerScore";
    case ParseFailureKind::ScoreOutOfRange: return "ScoreOutOfRange";
    case ParseFailureKind::EmptyReasoning: return "EmptyReasoning";
    case ParseFailureKind::HighlightNotInData: return "HighlightNotInData";
  }
  return "";
}

struct ParseFailure {
  ParseFailureKind kind;
  std::string detail;

  json to_json() const { return json{{"kind", std::string(to_string(kind))}, {"detail", detail}}; }
};

struct ParseOptions {
  /// Drop spans that are not in the data (with a warning) instead of failing.
  bool lenient_highlights = false;
  /// Report a second well-formed occurrence of a verdict tag as DuplicateTag.
  bool reject_duplicate_tags = false;
};

struct ParsedVerdict {
  JudgeVerdict verdict;
  std::vector<std::string> warnings;
};

enum class SpanVerdict { InData, NotInData };

namespace detail {

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

inline bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Matches `<name>` or `</name>` at `pos`, case-insensitive, tolerating
// whitespace inside the brackets. Returns the index past '>' on success.
inline std::optional<std::size_t> match_tag_at(std::string_view text, std::size_t pos, std::string_view name,
                                               bool closing) {
  if (pos >= text.size() || text[pos] != '<') return std::nullopt;
  std::size_t i = pos + 1;
  while (i < text.size() && is_blank(text[i])) ++i;
  if (closing) {
    if (i >= text.size() || text[i] != '/') return std::nullopt;
    ++i;
    while (i < text.size() && is_blank(text[i])) ++i;
  }
  if (text.size() - i < name.size()) return std::nullopt;
  for (std::size_t k = 0; k < name.size(); ++k) {
    if (ascii_lower(text[i + k]) != name[k]) return std::nullopt;
  }
  i += name.size();
  while (i < text.size() && is_blank(text[i])) ++i;
  if (i >= text.size() || text[i] != '>') return std::nullopt;
  return i + 1;
}

struct TagMatch {
  std::string_view content;
  std::size_t end;  // index past the closing tag
};

// First well-formed occurrence: an opening tag whose next same-name tag is a
// closing one.
inline std::optional<TagMatch> find_tag(std::string_view text, std::string_view name, std::size_t from = 0) {
  std::size_t pos = from;
  while ((pos = text.find('<', pos)) != std::string_view::npos) {
    auto open_end = match_tag_at(text, pos, name, false);
    if (!open_end) {
      ++pos;
      continue;
    }
    std::size_t scan = *open_end;
    while ((scan = text.find('<', scan)) != std::string_view::npos) {
      if (auto close_end = match_tag_at(text, scan, name, true)) {
        return TagMatch{text.substr(*open_end, scan - *open_end), *close_end};
      }
      if (match_tag_at(text, scan, name, false)) break;
      ++scan;
    }
    if (scan == std::string_view::npos) return std::nullopt;
    pos = scan;
  }
  return std::nullopt;
}

inline std::vector<std::string> split_bullets(std::string_view content) {
  std::vector<std::string> bullets;
  bool open = false;
  for (auto raw : split_lines(content)) {
    std::string line(trim(raw));
    for (auto& c : line)
      if (c == '\r') c = ' ';
    if (line.empty()) continue;
    if (line.front() == '-' || line.front() == '*') {
      std::string rest(trim(std::string_view(line).substr(1)));
      if (rest.empty()) continue;
      bullets.push_back(std::move(rest));
      open = true;
    } else if (open) {
      bullets.back() += ' ';
      bullets.back() += line;
    } else {
      bullets.push_back(std::move(line));
      open = true;
    }
  }
  return bullets;
}

// ['a', "b's"] with backslash escapes inside quotes.
inline std::optional<std::vector<std::string>> parse_highlight_list(std::string_view content) {
  auto s = trim(content);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') return std::nullopt;
  s = s.substr(1, s.size() - 2);
  std::vector<std::string> items;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < s.size() && is_blank(s[i])) ++i;
  };
  skip();
  while (i < s.size()) {
    char quote = s[i];
    if (quote != '\'' && quote != '"') return std::nullopt;
    ++i;
    std::string item;
    bool closed = false;
    while (i < s.size()) {
      char c = s[i++];
      if (c == '\\') {
        if (i >= s.size()) return std::nullopt;
        item += s[i++];
      } else if (c == quote) {
        closed = true;
        break;
      } else {
        item += c;
      }
    }
    if (!closed) return std::nullopt;
    items.push_back(std::move(item));
    skip();
    if (i < s.size()) {
      if (s[i] != ',') return std::nullopt;
      ++i;
      skip();
    }
  }
  return items;
}

inline std::string quote_span(const std::string& span) {
  const bool use_double = span.find('\'') != std::string::npos && span.find('"') == std::string::npos;
  const char q = use_double ? '"' : '\'';
  std::string out(1, q);
  for (char c : span) {
    if (c == '\\' || c == q) out += '\\';
    out += c;
  }
  out += q;
  return out;
}

}  // namespace detail

/// Classifies each span by case-sensitive substring search over the field
/// bodies. Empty spans are NotInData.
inline std::vector<std::pair<std::string, SpanVerdict>> validate_highlights(const std::vector<std::string>& spans,
                                                                           const EvaluationRecord& record) {
  std::vector<std::pair<std::string, SpanVerdict>> out;
  out.reserve(spans.size());
  for (const auto& span : spans) {
    out.emplace_back(span, record.contains_span(span) ? SpanVerdict::InData : SpanVerdict::NotInData);
  }
  return out;
}

/// Extracts and validates a verdict. Failures are reported in the order
/// MissingTag, DuplicateTag (opt-in), MalformedHighlightList, NonIntegerScore,
/// ScoreOutOfRange, EmptyReasoning, HighlightNotInData.
inline Result<ParsedVerdict, ParseFailure> parse_verdict_ex(std::string_view raw, const EvaluationRecord& record,
                                                            const ParseOptions& options = {}) {
  using K = ParseFailureKind;
  constexpr std::string_view names[] = {"reasoning", "highlight", "score"};
  std::optional<detail::TagMatch> found[3];
  std::string missing;
  for (int i = 0; i < 3; ++i) {
    found[i] = detail::find_tag(raw, names[i]);
    if (!found[i]) missing += (missing.empty() ? "<" : ", <") + std::string(names[i]) + ">";
  }
  if (!missing.empty()) return ParseFailure{K::MissingTag, "missing " + missing};
  if (options.reject_duplicate_tags) {
    for (int i = 0; i < 3; ++i) {
      if (detail::find_tag(raw, names[i], found[i]->end)) {
        return ParseFailure{K::DuplicateTag, "<" + std::string(names[i]) + "> appears more than once"};
      }
    }
  }

  auto spans = detail::parse_highlight_list(found[1]->content);
  if (!spans) {
    return ParseFailure{K::MalformedHighlightList,
                        "expected a bracketed list of quoted phrases, got '" +
                            std::string(detail::trim(found[1]->content)) + "'"};
  }

  auto score_text = detail::trim(found[2]->content);
  auto score = detail::parse_int(score_text);
  if (!score) return ParseFailure{K::NonIntegerScore, "score '" + std::string(score_text) + "' is not an integer"};
  if (!record.rubric().contains(*score)) {
    return ParseFailure{K::ScoreOutOfRange, "score " + std::to_string(*score) + " is not in the " +
                                                std::string(scale_name(record.rubric().scale())) + " rubric"};
  }

  auto bullets = detail::split_bullets(found[0]->content);
  if (bullets.empty()) return ParseFailure{K::EmptyReasoning, "reasoning has no content"};

  std::vector<std::string> kept;
  std::vector<std::string> warnings;
  for (auto& [span, verdict] : validate_highlights(*spans, record)) {
    if (verdict == SpanVerdict::InData) {
      kept.push_back(span);
      continue;
    }
    if (!options.lenient_highlights) {
      return ParseFailure{K::HighlightNotInData, "span '" + span + "' does not occur in the data"};
    }
    warnings.push_back("dropped highlight not in data: '" + span + "'");
  }

  try {
    JudgeVerdict verdict(std::move(bullets), std::move(kept), *score);
    verdict.check_against(record);
    return ParsedVerdict{std::move(verdict), std::move(warnings)};
  } catch (const ValidationError& e) {
    return ParseFailure{K::EmptyReasoning, e.what()};
  }
}

inline Result<JudgeVerdict, ParseFailure> parse_verdict(std::string_view raw, const EvaluationRecord& record,
                                                        const ParseOptions& options = {}) {
  auto parsed = parse_verdict_ex(raw, record, options);
  if (!parsed) return parsed.error();
  return parsed.value().verdict;
}

/// Canonical serialization: "- " bullets, single-quoted highlight list
/// (double quotes for spans containing an apostrophe), bare integer score.
inline std::string render_verdict(const JudgeVerdict& verdict) {
  std::string out = "<reasoning>\n";
  for (const auto& b : verdict.reasoning()) out += "- " + b + "\n";
  out += "</reasoning>\n<highlight>\n[";
  for (std::size_t i = 0; i < verdict.highlights().size(); ++i) {
    if (i) out += ", ";
    out += detail::quote_span(verdict.highlights()[i]);
  }
  out += "]\n</highlight>\n<score>\n" + std::to_string(verdict.score()) + "\n</score>";
  return out;
}

inline json to_json(const ParsedVerdict& parsed) {
  json j = to_json(parsed.verdict);
  if (!parsed.warnings.empty()) j["warnings"] = parsed.warnings;
  return j;
}

}  // namespace glider
