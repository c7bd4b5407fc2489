#pragma once

// Synthetic preference-data pipeline: sample a job from the taxonomy,
// generate a record with correct/incorrect verdicts, verify the pair, add
// highlight spans, then filter the corpus. Also hosts the adapters that map
// external datasets onto evaluation records.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "glider/core.hpp"
#include "glider/json_io.hpp"
#include "glider/llm_client.hpp"
#include "glider/parsing.hpp"
#include "glider/prompting.hpp"
#include "glider/random.hpp"
#include "glider/taxonomy.hpp"

namespace glider {

// ---------------------------------------------------------------------------
// Job sampling

struct JobOptions {
  int min_words = 150;
  int max_words = 6500;
  /// Share of binary-scale jobs generated as pairwise comparisons.
  double pairwise_fraction = 0.5;
  /// Share of jobs that combine two or three metrics.
  double multimetric_fraction = 0.1;
  /// Domains allowed to produce code in addition to the taxonomy's list.
  std::set<std::string> code_override;
};

inline void validate_job(const GenerationJob& job, const Taxonomy& taxonomy, const JobOptions& options = {}) {
  if (job.metrics.empty()) throw ValidationError("job_metrics", "job has no metric");
  if (job.tags.empty() || job.tags.size() > 4) throw ValidationError("job_tags", "job needs 1-4 tags");
  if (job.target_words < options.min_words || job.target_words > options.max_words) {
    throw ValidationError("job_target_words", "target_words outside configured bounds");
  }
  if (job.is_code && !taxonomy.requires_code(job.domain) && !options.code_override.count(job.domain)) {
    throw ValidationError("job_is_code", "domain '" + job.domain + "' does not allow code generation");
  }
  if (job.mode == JobMode::Pairwise) {
    if (job.scale != Scale::Binary) throw ValidationError("pairwise_binary", "pairwise jobs use the binary scale");
    if (!job.find_role(TagRole::Output) || job.tags.size() < 2) {
      throw ValidationError("pairwise_tags", "pairwise jobs need an output tag and a shared input tag");
    }
  }
}

/// Deterministic per seed. Scale, domain and metric are uniform; 1-4 tag
/// roles are drawn without replacement, each with a random name from its
/// 15-name pool, and kept in context/input/output/gold order.
inline GenerationJob sample_job(const Taxonomy& taxonomy, std::uint64_t seed, const JobOptions& options = {}) {
  Rng rng(seed);
  GenerationJob job;
  job.seed = seed;
  job.domain = taxonomy.all_domains()[rng.index(taxonomy.all_domains().size())];
  const auto& metrics = taxonomy.all_metrics();
  const auto& first = metrics[rng.index(metrics.size())];
  job.metrics.push_back({first.first, first.second});
  constexpr Scale scales[] = {Scale::Binary, Scale::Likert3, Scale::Likert5};
  job.scale = scales[rng.index(3)];

  const bool pairwise = job.scale == Scale::Binary && rng.bernoulli(options.pairwise_fraction);
  job.mode = pairwise ? JobMode::Pairwise : JobMode::Pointwise;

  std::vector<TagRole> roles{TagRole::Context, TagRole::Input, TagRole::Output, TagRole::GoldAnswer};
  for (std::size_t i = roles.size() - 1; i > 0; --i) std::swap(roles[i], roles[rng.index(i + 1)]);
  std::size_t k = static_cast<std::size_t>(rng.between(1, 4));
  std::vector<TagRole> chosen(roles.begin(), roles.begin() + static_cast<std::ptrdiff_t>(k));
  if (pairwise) {
    for (TagRole needed : {TagRole::Output, TagRole::Input}) {
      if (std::find(chosen.begin(), chosen.end(), needed) == chosen.end()) chosen.push_back(needed);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  for (TagRole role : chosen) {
    const auto& pool = tag_pool(role);
    job.tags.push_back({role, std::string(pool[rng.index(pool.size())])});
  }

  job.target_words = static_cast<int>(rng.between(options.min_words, options.max_words));
  job.is_code = taxonomy.requires_code(job.domain);

  if (rng.bernoulli(options.multimetric_fraction) && metrics.size() > 1) {
    const std::size_t extra = std::min<std::size_t>(1 + rng.index(2), metrics.size() - 1);
    while (job.metrics.size() < 1 + extra) {
      const auto& m = metrics[rng.index(metrics.size())];
      bool dup = std::any_of(job.metrics.begin(), job.metrics.end(), [&](const MetricRef& r) { return r.name == m.first; });
      if (!dup) job.metrics.push_back({m.first, m.second});
    }
  }
  return job;
}

// ---------------------------------------------------------------------------
// Generation

enum class GenErrorKind { Transport, Unparseable, InvariantViolated };

inline std::string_view to_string(GenErrorKind k) {
  switch (k) {
    case GenErrorKind::Transport: return "Transport";
    case GenErrorKind::Unparseable: return "Unparseable";
    case GenErrorKind::InvariantViolated: return "InvariantViolated";
  }
  return "";
}

struct GenError {
  GenErrorKind kind;
  std::string reason;

  json to_json() const { return json{{"kind", std::string(to_string(kind))}, {"reason", reason}}; }
};

struct GenerationConfig {
  int max_tokens = 8192;
};

namespace detail {

inline std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = ascii_lower(c);
  return out;
}

/// Abbreviations such as "[7000 more words here...]" or "[truncated]".
inline bool has_truncation_marker(std::string_view text) {
  std::size_t pos = 0;
  while ((pos = text.find('[', pos)) != std::string_view::npos) {
    auto close = text.find(']', pos);
    if (close == std::string_view::npos) break;
    if (close - pos <= 200) {
      std::string inner = lower_ascii(trim(text.substr(pos + 1, close - pos - 1)));
      const bool counted = !inner.empty() && inner.front() >= '0' && inner.front() <= '9' &&
                           inner.find("more") != std::string::npos;
      const bool unit = inner.find("word") != std::string::npos || inner.find("line") != std::string::npos ||
                        inner.find("paragraph") != std::string::npos || inner.find("token") != std::string::npos ||
                        inner.find("character") != std::string::npos || inner.find("page") != std::string::npos;
      if ((counted && unit) || inner.find("truncated") != std::string::npos ||
          inner.rfind("continued", 0) == 0 || inner.rfind("rest of", 0) == 0) {
        return true;
      }
    }
    pos = pos + 1;
  }
  return false;
}

inline std::optional<std::string> tag_content(std::string_view raw, std::string_view name) {
  auto m = find_tag(raw, lower_ascii(name));
  if (!m) return std::nullopt;
  return std::string(trim(m->content));
}

/// Lines of the form "<int>: text" (also "<int>." / "<int>)" / "- <int>: text").
inline Result<std::map<int, std::string>, GenError> parse_rubric_lines(std::string_view text) {
  std::map<int, std::string> out;
  for (auto raw : split_lines(text)) {
    auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '-' || line.front() == '*') line = trim(line.substr(1));
    std::size_t i = 0;
    while (i < line.size() && line[i] != ':' && line[i] != ')' && !(line[i] == '.' && i + 1 < line.size() && line[i + 1] == ' ')) ++i;
    if (i == line.size()) return GenError{GenErrorKind::Unparseable, "rubric line without score: " + std::string(line)};
    auto key = trim(line.substr(0, i));
    auto score = parse_int(key);
    if (!score) return GenError{GenErrorKind::Unparseable, "NonIntegerScore in rubric: '" + std::string(key) + "'"};
    out[*score] = std::string(trim(line.substr(i + 1)));
  }
  return out;
}

inline bool mentions(std::string_view haystack, std::string_view needle) {
  return lower_ascii(haystack).find(lower_ascii(needle)) != std::string::npos;
}

inline std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

inline Metadata job_metadata(const GenerationJob& job) {
  std::vector<std::string> names;
  for (const auto& m : job.metrics) names.push_back(m.name);
  return Metadata{{"domain", job.domain},
                  {"metric", join(names, ", ")},
                  {"language", "en"},
                  {"source", "synthetic"},
                  {"mode", job.mode == JobMode::Pairwise ? "pairwise" : "pointwise"},
                  {"content", job.is_code ? "code" : "text"},
                  {"seed", std::to_string(job.seed)}};
}

inline Result<std::vector<DataField>, GenError> parse_data_fields(std::string_view data,
                                                                  const std::vector<std::string>& tags) {
  std::vector<DataField> fields;
  for (const auto& tag : tags) {
    auto body = tag_content(data, tag);
    if (!body) return GenError{GenErrorKind::Unparseable, "missing data tag <" + tag + ">"};
    fields.push_back({tag, *body});
  }
  return fields;
}

inline Result<std::vector<std::string>, GenError> parse_reasoning(std::string_view raw, std::string_view tag) {
  auto text = tag_content(raw, tag);
  if (!text) return GenError{GenErrorKind::Unparseable, "missing <" + std::string(tag) + ">"};
  auto bullets = split_bullets(*text);
  if (bullets.empty()) return GenError{GenErrorKind::Unparseable, "EmptyReasoning in <" + std::string(tag) + ">"};
  return bullets;
}

inline Result<int, GenError> parse_score(std::string_view raw, std::string_view tag) {
  auto text = tag_content(raw, tag);
  if (!text) return GenError{GenErrorKind::Unparseable, "missing <" + std::string(tag) + ">"};
  auto score = parse_int(*text);
  if (!score) return GenError{GenErrorKind::Unparseable, "NonIntegerScore in <" + std::string(tag) + ">"};
  return *score;
}

inline Result<std::string, GenError> call_generator(ChatClient& client, const std::string& prompt,
                                                    const GenerationJob& job, const GenerationConfig& cfg) {
  ChatRequest req(build_generation_system_prompt(), prompt, jittered_generation_sampling(job.seed, cfg.max_tokens));
  auto text = client.complete(req);
  if (!text) return GenError{GenErrorKind::Transport, text.error().detail};
  if (has_truncation_marker(text.value())) return GenError{GenErrorKind::Unparseable, "TruncationMarker"};
  return std::move(text).value();
}

inline std::optional<GenError> check_multimetric(const GenerationJob& job, const std::string& pass_criteria) {
  if (!job.is_multimetric()) return std::nullopt;
  for (const auto& m : job.metrics) {
    if (!mentions(pass_criteria, m.name)) {
      return GenError{GenErrorKind::InvariantViolated, "pass criteria do not mention metric '" + m.name + "'"};
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Candidate A holds the better response when the seed's low bit is clear.
inline bool candidate_a_is_better(std::uint64_t seed) { return (seed & 1U) == 0; }

inline Result<PreferencePair, GenError> generate_pointwise(const GenerationJob& job, ChatClient& client,
                                                           const GenerationConfig& cfg = {}) {
  if (job.mode != JobMode::Pointwise) throw std::invalid_argument("generate_pointwise needs a pointwise job");
  auto raw = detail::call_generator(client, build_pointwise_generation_prompt(job), job, cfg);
  if (!raw) return raw.error();
  const std::string& text = raw.value();

  auto data = detail::tag_content(text, "data");
  auto criteria = detail::tag_content(text, "pass_criteria");
  auto rubric_text = detail::tag_content(text, "rubric");
  if (!data || !criteria || !rubric_text) {
    return GenError{GenErrorKind::Unparseable, "missing <data>, <pass_criteria> or <rubric>"};
  }
  auto fields = detail::parse_data_fields(*data, job.tag_names());
  if (!fields) return fields.error();
  auto rubric = detail::parse_rubric_lines(*rubric_text);
  if (!rubric) return rubric.error();
  auto good_reasoning = detail::parse_reasoning(text, "correct_reasoning");
  if (!good_reasoning) return good_reasoning.error();
  auto good_score = detail::parse_score(text, "correct_score");
  if (!good_score) return good_score.error();
  auto bad_reasoning = detail::parse_reasoning(text, "incorrect_reasoning");
  if (!bad_reasoning) return bad_reasoning.error();
  auto bad_score = detail::parse_score(text, "incorrect_score");
  if (!bad_score) return bad_score.error();
  if (auto err = detail::check_multimetric(job, *criteria)) return *err;

  try {
    EvaluationRecord record(fields.value(), *criteria, Rubric(job.scale, rubric.value()), detail::job_metadata(job));
    return PreferencePair(record, JudgeVerdict(good_reasoning.value(), {}, good_score.value()),
                          JudgeVerdict(bad_reasoning.value(), {}, bad_score.value()));
  } catch (const ValidationError& e) {
    return GenError{GenErrorKind::InvariantViolated, e.invariant()};
  }
}

/// The two responses are placed into <OUTPUT>_A / <OUTPUT>_B in an order set
/// by candidate_a_is_better(job.seed); the binary rubric asks whether A is
/// the better one.
inline Result<PreferencePair, GenError> generate_pairwise(const GenerationJob& job, ChatClient& client,
                                                          const GenerationConfig& cfg = {}) {
  if (job.mode != JobMode::Pairwise) throw std::invalid_argument("generate_pairwise needs a pairwise job");
  auto raw = detail::call_generator(client, build_pairwise_generation_prompt(job), job, cfg);
  if (!raw) return raw.error();
  const std::string& text = raw.value();

  std::vector<std::string> shared;
  for (const auto& t : job.tags)
    if (t.role != TagRole::Output) shared.push_back(t.name);
  auto data = detail::tag_content(text, "data");
  auto better = detail::tag_content(text, "better_response");
  auto worse = detail::tag_content(text, "worse_response");
  auto criteria = detail::tag_content(text, "pass_criteria");
  if (!data || !better || !worse || !criteria) {
    return GenError{GenErrorKind::Unparseable, "missing <data>, <better_response>, <worse_response> or <pass_criteria>"};
  }
  auto fields = detail::parse_data_fields(*data, shared);
  if (!fields) return fields.error();
  auto good_reasoning = detail::parse_reasoning(text, "correct_reasoning");
  if (!good_reasoning) return good_reasoning.error();
  auto bad_reasoning = detail::parse_reasoning(text, "incorrect_reasoning");
  if (!bad_reasoning) return bad_reasoning.error();
  if (auto err = detail::check_multimetric(job, *criteria)) return *err;

  const auto [tag_a, tag_b] = pairwise_candidate_tags(job);
  const bool a_better = candidate_a_is_better(job.seed);
  auto data_fields = fields.value();
  data_fields.push_back({tag_a, a_better ? *better : *worse});
  data_fields.push_back({tag_b, a_better ? *worse : *better});
  const std::string& better_tag = a_better ? tag_a : tag_b;
  const std::string& worse_tag = a_better ? tag_b : tag_a;
  auto relabel = [&](std::vector<std::string> bullets) {
    for (auto& b : bullets) {
      b = detail::replace_all(detail::replace_all(std::move(b), "BETTER_RESPONSE", better_tag), "WORSE_RESPONSE",
                              worse_tag);
    }
    return bullets;
  };
  const int chosen_score = a_better ? 1 : 0;
  try {
    Rubric rubric(Scale::Binary, {{0, tag_b + " better satisfies the pass criteria than " + tag_a},
                                  {1, tag_a + " better satisfies the pass criteria than " + tag_b}});
    EvaluationRecord record(std::move(data_fields), *criteria, std::move(rubric), detail::job_metadata(job));
    return PreferencePair(record, JudgeVerdict(relabel(good_reasoning.value()), {}, chosen_score),
                          JudgeVerdict(relabel(bad_reasoning.value()), {}, 1 - chosen_score));
  } catch (const ValidationError& e) {
    return GenError{GenErrorKind::InvariantViolated, e.invariant()};
  }
}

// ---------------------------------------------------------------------------
// Verification

struct VerifyOutcome {
  bool confirmed = false;
  /// Name of the first INVALID field, or "verifier_unparseable".
  std::string reason;

  static VerifyOutcome Confirmed() { return {true, {}}; }
  static VerifyOutcome Rejected(std::string reason) { return {false, std::move(reason)}; }
};

inline constexpr std::array<std::string_view, 4> kVerifiedFields{"chosen_score", "chosen_reasoning",
                                                                 "rejected_score", "rejected_reasoning"};

/// VALID/INVALID per field, or nullopt when a field is missing.
inline std::optional<std::map<std::string, bool>> parse_verifier_reply(std::string_view reply) {
  std::map<std::string, bool> out;
  for (auto raw : detail::split_lines(reply)) {
    auto line = detail::trim(raw);
    auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    auto key = detail::lower_ascii(detail::trim(line.substr(0, colon)));
    auto value = detail::lower_ascii(detail::trim(line.substr(colon + 1)));
    if (std::find(kVerifiedFields.begin(), kVerifiedFields.end(), key) == kVerifiedFields.end()) continue;
    if (out.count(key)) continue;
    if (value == "valid") {
      out[key] = true;
    } else if (value == "invalid") {
      out[key] = false;
    }
  }
  if (out.size() != kVerifiedFields.size()) return std::nullopt;
  return out;
}

inline Result<VerifyOutcome, TransportError> verify_pair(const EvaluationRecord& record, const PreferencePair& pair,
                                                         ChatClient& client, const GenerationConfig& cfg = {}) {
  const std::string prompt = build_verification_prompt(record, pair);
  std::string user = prompt;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto reply = client.complete(ChatRequest(std::nullopt, user, SamplingConfig::judge(std::min(cfg.max_tokens, 512))));
    if (!reply) return reply.error();
    if (auto fields = parse_verifier_reply(reply.value())) {
      for (auto name : kVerifiedFields) {
        if (!fields->at(std::string(name))) return VerifyOutcome::Rejected(std::string(name));
      }
      return VerifyOutcome::Confirmed();
    }
    user = prompt +
           "\n\nYour previous answer did not follow the format. Output exactly four lines of the form "
           "\"field: VALID\" or \"field: INVALID\".";
  }
  return VerifyOutcome::Rejected("verifier_unparseable");
}

// ---------------------------------------------------------------------------
// Highlights

struct HighlightOutcome {
  PreferencePair pair;
  /// Set when no proposed span survived validation.
  bool flagged = false;
  std::vector<std::string> dropped;
};

inline Result<HighlightOutcome, TransportError> generate_highlights(const EvaluationRecord& record,
                                                                    const PreferencePair& pair, ChatClient& client,
                                                                    const GenerationConfig& cfg = {}) {
  auto reply = client.complete(ChatRequest(build_generation_system_prompt(), build_highlight_prompt(record, pair.chosen()),
                                           SamplingConfig::judge(std::min(cfg.max_tokens, 1024))));
  if (!reply) return reply.error();
  std::vector<std::string> proposed;
  if (auto m = detail::find_tag(reply.value(), "highlight")) {
    if (auto list = detail::parse_highlight_list(m->content)) proposed = std::move(*list);
  }
  std::vector<std::string> kept, dropped;
  for (auto& [span, verdict] : validate_highlights(proposed, record)) {
    if (verdict == SpanVerdict::NotInData) {
      dropped.push_back(span);
    } else if (std::find(kept.begin(), kept.end(), span) == kept.end()) {
      kept.push_back(span);
    }
  }
  const bool flagged = kept.empty();
  PreferencePair updated(record, pair.chosen().with_highlights(std::move(kept)), pair.rejected());
  return HighlightOutcome{std::move(updated), flagged, std::move(dropped)};
}

// ---------------------------------------------------------------------------
// Filtering

enum class FilterReason { Duplicate, NonIntegerScore, Markdown, SpecialCharsInRubric, TruncationMarker, TagRoundTripUnsafe, Invalid };

inline std::string_view to_string(FilterReason r) {
  switch (r) {
    case FilterReason::Duplicate: return "Duplicate";
    case FilterReason::NonIntegerScore: return "NonIntegerScore";
    case FilterReason::Markdown: return "Markdown";
    case FilterReason::SpecialCharsInRubric: return "SpecialCharsInRubric";
    case FilterReason::TruncationMarker: return "TruncationMarker";
    case FilterReason::TagRoundTripUnsafe: return "TagRoundTripUnsafe";
    case FilterReason::Invalid: return "Invalid";
  }
  return "";
}

struct FilterReport {
  std::size_t kept = 0;
  std::map<FilterReason, std::size_t> dropped;

  std::size_t total_dropped() const {
    std::size_t n = 0;
    for (const auto& [r, c] : dropped) n += c;
    return n;
  }

  std::size_t count(FilterReason r) const {
    auto it = dropped.find(r);
    return it == dropped.end() ? 0 : it->second;
  }

  json to_json() const {
    json d = json::object();
    for (const auto& [r, c] : dropped) d[std::string(to_string(r))] = c;
    return json{{"kept", kept}, {"dropped", d}, {"input", kept + total_dropped()}};
  }
};

namespace detail {

inline bool is_markdown_table_rule(std::string_view line) {
  line = trim(line);
  if (line.find('|') == std::string_view::npos || line.find("---") == std::string_view::npos) return false;
  return std::all_of(line.begin(), line.end(), [](char c) { return c == '|' || c == '-' || c == ':' || c == ' '; });
}

inline std::string strip_fenced(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto open = text.find("```", pos);
    if (open == std::string_view::npos) break;
    auto close = text.find("```", open + 3);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    pos = close + 3;
  }
  out.append(text.substr(pos));
  return out;
}

inline bool has_markdown(std::string_view text) {
  if (text.find("```") != std::string_view::npos || text.find("**") != std::string_view::npos ||
      text.find("##") != std::string_view::npos) {
    return true;
  }
  for (auto line : split_lines(text))
    if (is_markdown_table_rule(line)) return true;
  return false;
}

/// Invalid UTF-8, control characters other than tab/newline/CR, C1 controls,
/// U+FFFD and U+FEFF.
inline bool has_special_chars(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      if ((c < 0x20 && c != '\t' && c != '\n' && c != '\r') || c == 0x7F) return true;
      ++i;
      continue;
    }
    int len = (c >= 0xC2 && c <= 0xDF) ? 2 : (c >= 0xE0 && c <= 0xEF) ? 3 : (c >= 0xF0 && c <= 0xF4) ? 4 : 0;
    if (len == 0 || i + static_cast<std::size_t>(len) > text.size()) return true;
    std::uint32_t cp = c & (len == 2 ? 0x1F : len == 3 ? 0x0F : 0x07);
    for (int k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + static_cast<std::size_t>(k)]);
      if ((cc & 0xC0) != 0x80) return true;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((len == 3 && cp < 0x800) || (len == 4 && (cp < 0x10000 || cp > 0x10FFFF)) || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return true;
    }
    if ((cp >= 0x80 && cp <= 0x9F) || cp == 0xFFFD || cp == 0xFEFF) return true;
    i += static_cast<std::size_t>(len);
  }
  return false;
}

inline std::string dedup_key(const EvaluationRecord& record) {
  std::string text = record_data_section(record) + "\n" + record.pass_criteria();
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += ascii_lower(c);
  }
  return out;
}

inline std::vector<std::string> sample_texts(const PreferencePair& p) {
  std::vector<std::string> texts{p.record().pass_criteria()};
  for (const auto& f : p.record().data_fields()) texts.push_back(f.body);
  for (const auto& [k, d] : p.record().rubric().descriptions()) texts.push_back(d);
  for (const auto* v : {&p.chosen(), &p.rejected()}) {
    for (const auto& b : v->reasoning()) texts.push_back(b);
  }
  return texts;
}

inline std::optional<FilterReason> content_violation(const PreferencePair& p) {
  const auto& record = p.record();
  for (const auto& t : sample_texts(p))
    if (has_truncation_marker(t)) return FilterReason::TruncationMarker;
  for (const auto& f : record.data_fields()) {
    for (auto line : split_lines(f.body))
      if (is_bare_tag_line(line)) return FilterReason::TagRoundTripUnsafe;
  }
  if (has_special_chars(record.pass_criteria())) return FilterReason::SpecialCharsInRubric;
  for (const auto& [k, d] : record.rubric().descriptions())
    if (has_special_chars(d)) return FilterReason::SpecialCharsInRubric;

  // Code-mode samples: data bodies are code, and fenced regions anywhere are exempt.
  const bool code = record.metadata_value("content") == "code";
  std::vector<std::string> texts;
  texts.push_back(record.pass_criteria());
  if (!code) {
    for (const auto& f : record.data_fields()) texts.push_back(f.body);
  }
  for (const auto& [k, d] : record.rubric().descriptions()) texts.push_back(d);
  for (const auto* v : {&p.chosen(), &p.rejected()}) {
    for (const auto& b : v->reasoning()) texts.push_back(b);
  }
  for (const auto& t : texts) {
    if (has_markdown(code ? strip_fenced(t) : t)) return FilterReason::Markdown;
  }
  return std::nullopt;
}

inline bool is_integer_json(const json& v) { return v.is_number_integer(); }

inline bool raw_has_non_integer_score(const json& row) {
  for (const char* side : {"chosen", "rejected"}) {
    if (row.contains(side) && row[side].is_object() && row[side].contains("score") &&
        !is_integer_json(row[side]["score"])) {
      return true;
    }
  }
  if (row.contains("record") && row["record"].is_object() && row["record"].contains("rubric")) {
    const auto& rubric = row["record"]["rubric"];
    if (rubric.is_object() && rubric.contains("descriptions") && rubric["descriptions"].is_object()) {
      for (const auto& [key, value] : rubric["descriptions"].items())
        if (!parse_int(key)) return true;
    }
  }
  return false;
}

}  // namespace detail

/// Drops samples in the order: content rules (truncation, unsafe tag lines,
/// special characters, markdown), then exact duplicates after normalization.
/// The first occurrence of a duplicate is kept; input order is preserved.
inline std::pair<std::vector<PreferencePair>, FilterReport> filter_dataset(const std::vector<PreferencePair>& pairs) {
  std::vector<PreferencePair> kept;
  FilterReport report;
  std::unordered_set<std::string> seen;
  for (const auto& p : pairs) {
    if (auto reason = detail::content_violation(p)) {
      ++report.dropped[*reason];
      continue;
    }
    if (!seen.insert(detail::dedup_key(p.record())).second) {
      ++report.dropped[FilterReason::Duplicate];
      continue;
    }
    kept.push_back(p);
  }
  report.kept = kept.size();
  return {std::move(kept), report};
}

/// Same as above over raw `{record, chosen, rejected}` rows, which can carry
/// non-integer scores or fail typing (counted as Invalid).
inline std::pair<std::vector<PreferencePair>, FilterReport> filter_rows(const std::vector<json>& rows) {
  std::vector<PreferencePair> typed;
  FilterReport pre;
  for (const auto& row : rows) {
    if (detail::raw_has_non_integer_score(row)) {
      ++pre.dropped[FilterReason::NonIntegerScore];
      continue;
    }
    try {
      typed.push_back(pair_from_json(row));
    } catch (const std::exception&) {
      ++pre.dropped[FilterReason::Invalid];
    }
  }
  auto [kept, report] = filter_dataset(typed);
  for (const auto& [r, c] : pre.dropped) report.dropped[r] += c;
  return {std::move(kept), report};
}

// ---------------------------------------------------------------------------
// External datasets

struct AdapterError {
  std::string detail;
};

struct ExternalAdapter {
  std::string name;
  /// Default number of rows taken from the source.
  std::size_t limit;
  std::function<EvaluationRecord(const json&)> adapt;
};

namespace detail {

inline std::string text_field(const json& row, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (row.contains(k) && !row[k].is_null()) {
      const auto& v = row[k];
      if (v.is_string()) return v.get<std::string>();
      if (v.is_array()) {
        std::string out;
        for (const auto& item : v) {
          if (!out.empty()) out += '\n';
          out += item.is_string() ? item.get<std::string>() : item.dump();
        }
        return out;
      }
      if (v.is_number()) return v.dump();
    }
  }
  throw AdapterError{"missing field '" + std::string(*keys.begin()) + "'"};
}

inline double number_field(const json& row, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (row.contains(k) && row[k].is_number()) return row[k].get<double>();
    if (row.contains(k) && row[k].is_boolean()) return row[k].get<bool>() ? 1.0 : 0.0;
  }
  throw AdapterError{"missing numeric field '" + std::string(*keys.begin()) + "'"};
}

inline int round_half_away(double v) { return static_cast<int>(v < 0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5)); }

inline Metadata external_metadata(const std::string& source, const std::string& domain, int gold) {
  return Metadata{{"source", source}, {"domain", domain}, {"language", "en"}, {"gold_score", std::to_string(gold)}};
}

inline Rubric safety_rubric(const std::string& tag, const std::string& what) {
  return Rubric(Scale::Binary, {{0, "The " + tag + " contains " + what + "."},
                                {1, "The " + tag + " is free of " + what + "."}});
}

inline std::string render_table(const json& table) {
  if (!table.is_array()) return table.is_string() ? table.get<std::string>() : table.dump();
  std::string out;
  for (const auto& row : table) {
    if (!out.empty()) out += '\n';
    if (row.is_array()) {
      std::vector<std::string> cells;
      for (const auto& c : row) cells.push_back(c.is_string() ? c.get<std::string>() : c.dump());
      out += join(cells, " | ");
    } else {
      out += row.is_string() ? row.get<std::string>() : row.dump();
    }
  }
  return out;
}

}  // namespace detail

/// Adapters for the external training sources, keyed by name; `limit` is the
/// number of rows used from each.
inline const std::map<std::string, ExternalAdapter>& external_adapters() {
  using detail::external_metadata;
  using detail::number_field;
  using detail::text_field;
  static const std::map<std::string, ExternalAdapter> adapters = [] {
    std::map<std::string, ExternalAdapter> m;
    auto add = [&](std::string name, std::size_t limit, std::function<EvaluationRecord(const json&)> fn) {
      m.emplace(name, ExternalAdapter{name, limit, std::move(fn)});
    };
    add("mocha", 2500, [](const json& row) {
      std::vector<DataField> fields{{"PASSAGE", text_field(row, {"context", "passage"})},
                                    {"QUESTION", text_field(row, {"question"})}};
      if (row.contains("reference") && row["reference"].is_string()) {
        fields.push_back({"REFERENCE_ANSWER", row["reference"].get<std::string>()});
      }
      fields.push_back({"CANDIDATE_ANSWER", text_field(row, {"candidate"})});
      const int gold = std::clamp(detail::round_half_away(number_field(row, {"score"})), 1, 5);
      Rubric rubric(Scale::Likert5, {{1, "The CANDIDATE_ANSWER is incorrect or unrelated to the QUESTION."},
                                     {2, "The CANDIDATE_ANSWER is mostly incorrect with minor relevant content."},
                                     {3, "The CANDIDATE_ANSWER is partially correct."},
                                     {4, "The CANDIDATE_ANSWER is mostly correct with small omissions."},
                                     {5, "The CANDIDATE_ANSWER is fully correct given the PASSAGE."}});
      return EvaluationRecord(std::move(fields),
                              "Is the CANDIDATE_ANSWER a correct answer to the QUESTION based on the PASSAGE?",
                              std::move(rubric), external_metadata("MOCHA", "Reading comprehension", gold));
    });
    add("finqa", 2000, [](const json& row) {
      const json& qa = row.contains("qa") ? row["qa"] : row;
      std::string context = text_field(row, {"pre_text"});
      if (row.contains("table")) context += "\n" + detail::render_table(row["table"]);
      if (row.contains("post_text")) context += "\n" + text_field(row, {"post_text"});
      const int gold = row.contains("label") ? static_cast<int>(number_field(row, {"label"})) : 1;
      return EvaluationRecord(
          {{"CONTEXT", context}, {"QUESTION", text_field(qa, {"question"})}, {"ANSWER", text_field(qa, {"answer", "exe_ans"})}},
          "Is the ANSWER a correct response to the QUESTION given the financial information in the CONTEXT?",
          Rubric(Scale::Binary, {{0, "The ANSWER is not supported by the CONTEXT."},
                                 {1, "The ANSWER is correct and supported by the CONTEXT."}}),
          external_metadata("FinQA", "Finance", gold));
    });
    add("pile_nontoxic", 100, [](const json& row) {
      return EvaluationRecord({{"TEXT", text_field(row, {"text"})}}, "Is the TEXT free of toxic content?",
                              detail::safety_rubric("TEXT", "toxic content"),
                              external_metadata("tomekkorbak/pile-nontoxic-chunk-0", "Content moderation", 1));
    });
    add("pii", 100, [](const json& row) {
      const int has_pii = static_cast<int>(number_field(row, {"contains_pii", "label"}));
      return EvaluationRecord({{"TEXT", text_field(row, {"text", "input"})}},
                              "Is the TEXT free of personally identifiable information?",
                              detail::safety_rubric("TEXT", "personally identifiable information"),
                              external_metadata("Prasann15479/PII-Dataset", "Data privacy", has_pii ? 0 : 1));
    });
    add("toxic_conversations", 1000, [](const json& row) {
      const int toxic = static_cast<int>(number_field(row, {"label"}));
      return EvaluationRecord({{"MESSAGE", text_field(row, {"text"})}}, "Is the MESSAGE free of toxic content?",
                              detail::safety_rubric("MESSAGE", "toxic content"),
                              external_metadata("SetFit/toxic_conversations", "Content moderation", toxic ? 0 : 1));
    });
    add("real_toxicity_prompts", 2500, [](const json& row) {
      if (!row.contains("prompt") || !row.contains("continuation")) throw AdapterError{"missing field 'prompt'"};
      const double toxicity = number_field(row["continuation"], {"toxicity"});
      return EvaluationRecord({{"PROMPT", text_field(row["prompt"], {"text"})},
                               {"CONTINUATION", text_field(row["continuation"], {"text"})}},
                              "Is the CONTINUATION of the PROMPT free of toxic content?",
                              detail::safety_rubric("CONTINUATION", "toxic content"),
                              external_metadata("allenai/real-toxicity-prompts", "Content moderation",
                                                toxicity < 0.5 ? 1 : 0));
    });
    add("helpsteer", 2000, [](const json& row) {
      const int gold = std::clamp(detail::round_half_away(number_field(row, {"helpfulness"})) + 1, 1, 5);
      Rubric rubric(Scale::Likert5, {{1, "The RESPONSE does not help with the USER_INPUT."},
                                     {2, "The RESPONSE is of limited help."},
                                     {3, "The RESPONSE is partially helpful."},
                                     {4, "The RESPONSE is helpful with minor gaps."},
                                     {5, "The RESPONSE is fully helpful and addresses every part of the USER_INPUT."}});
      return EvaluationRecord({{"USER_INPUT", text_field(row, {"prompt"})}, {"RESPONSE", text_field(row, {"response"})}},
                              "How helpful is the RESPONSE to the USER_INPUT?", std::move(rubric),
                              external_metadata("nvidia/HelpSteer", "Assistant dialogue", gold));
    });
    add("beavertails", 1000, [](const json& row) {
      const int safe = static_cast<int>(number_field(row, {"is_safe"}));
      return EvaluationRecord({{"USER_INPUT", text_field(row, {"prompt"})}, {"RESPONSE", text_field(row, {"response"})}},
                              "Is the RESPONSE to the USER_INPUT harmless?",
                              Rubric(Scale::Binary, {{0, "The RESPONSE is harmful or assists with harm."},
                                                     {1, "The RESPONSE is harmless."}}),
                              external_metadata("PKU-Alignment/BeaverTails", "AI safety", safe ? 1 : 0));
    });
    return m;
  }();
  return adapters;
}

inline Result<EvaluationRecord, AdapterError> adapt_external(const json& row, const std::string& adapter) {
  const auto& adapters = external_adapters();
  auto it = adapters.find(adapter);
  if (it == adapters.end()) return AdapterError{"no adapter named '" + adapter + "'"};
  try {
    return it->second.adapt(row);
  } catch (const AdapterError& e) {
    return e;
  } catch (const ValidationError& e) {
    return AdapterError{e.what()};
  } catch (const json::exception& e) {
    return AdapterError{e.what()};
  }
}

/// Augmented copy placed in a different domain; data and rubric unchanged.
inline EvaluationRecord augment_domain(const EvaluationRecord& record, const std::string& domain) {
  return record.with_metadata("domain", domain).with_metadata("augmented", "true");
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
  std::uint64_t base_seed = 0;
  std::size_t count = 0;
  int parallelism = 1;
  JobOptions jobs;
  GenerationConfig generation;
  std::filesystem::path output_dir;
  /// Stage results are stored here and reused on the next run.
  std::optional<std::filesystem::path> checkpoint_dir;
};

struct PipelineStats {
  std::size_t jobs = 0;
  std::size_t generated = 0;
  std::map<std::string, std::size_t> generation_errors;
  std::size_t confirmed = 0;
  std::map<std::string, std::size_t> verification_rejects;
  std::size_t highlighted = 0;
  std::size_t flagged_no_highlights = 0;

  json to_json() const {
    return json{{"jobs", jobs},
                {"generated", generated},
                {"generation_errors", generation_errors},
                {"confirmed", confirmed},
                {"verification_rejects", verification_rejects},
                {"highlighted", highlighted},
                {"flagged_no_highlights", flagged_no_highlights}};
  }
};

struct PipelineResult {
  std::vector<PreferencePair> pairs;
  FilterReport report;
  PipelineStats stats;
};

namespace detail {

// One stage result per job index: a pair, or an error/reject label.
struct StageItem {
  std::optional<PreferencePair> pair;
  std::string error;
};

inline void write_stage(const std::filesystem::path& path, const std::vector<StageItem>& items,
                        const std::vector<std::uint64_t>& seeds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (std::size_t i = 0; i < items.size(); ++i) {
    json row{{"seed", seeds[i]}};
    if (items[i].pair) {
      row["pair"] = glider::to_json(*items[i].pair);
    } else {
      row["error"] = items[i].error;
    }
    out << row.dump() << '\n';
  }
}

inline std::optional<std::vector<StageItem>> read_stage(const std::filesystem::path& path,
                                                        const std::vector<std::uint64_t>& seeds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<StageItem> items;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = json::parse(line);
    StageItem item;
    if (row.contains("pair")) {
      item.pair = pair_from_json(row["pair"]);
    } else {
      item.error = row.value("error", "");
    }
    items.push_back(std::move(item));
  }
  if (items.size() != seeds.size()) return std::nullopt;
  return items;
}

template <class Fn>
std::vector<StageItem> run_stage(const char* name, const PipelineConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                 const std::vector<StageItem>& input, Fn&& fn) {
  std::optional<std::filesystem::path> path;
  if (cfg.checkpoint_dir) {
    path = *cfg.checkpoint_dir / (std::string(name) + ".jsonl");
    if (auto cached = read_stage(*path, seeds)) return std::move(*cached);
  }
  std::vector<StageItem> out(seeds.size());
  parallel_for(seeds.size(), cfg.parallelism, [&](std::size_t i) {
    if (!input.empty() && !input[i].pair) {
      out[i].error = input[i].error;
      return;
    }
    out[i] = fn(i);
  });
  if (path) write_stage(*path, out, seeds);
  return out;
}

}  // namespace detail

/// Runs generate -> verify -> highlight -> filter for seeds
/// [base_seed, base_seed + count) and writes train.jsonl and
/// filter_report.json to `output_dir`. Results are ordered by seed, so
/// parallel execution does not change the output.
inline PipelineResult run_pipeline(const Taxonomy& taxonomy, const PipelineConfig& cfg, ChatClient& client) {
  std::vector<std::uint64_t> seeds(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) seeds[i] = cfg.base_seed + i;
  if (cfg.checkpoint_dir) std::filesystem::create_directories(*cfg.checkpoint_dir);

  auto generated = detail::run_stage("generated", cfg, seeds, {}, [&](std::size_t i) {
    auto job = sample_job(taxonomy, seeds[i], cfg.jobs);
    auto pair = job.mode == JobMode::Pairwise ? generate_pairwise(job, client, cfg.generation)
                                              : generate_pointwise(job, client, cfg.generation);
    if (!pair) {
      return detail::StageItem{std::nullopt, "generation:" + std::string(to_string(pair.error().kind)) + ":" +
                                                 pair.error().reason};
    }
    return detail::StageItem{pair.value(), {}};
  });

  auto verified = detail::run_stage("verified", cfg, seeds, generated, [&](std::size_t i) {
    const auto& pair = *generated[i].pair;
    auto outcome = verify_pair(pair.record(), pair, client, cfg.generation);
    if (!outcome) return detail::StageItem{std::nullopt, "verification:transport"};
    if (!outcome.value().confirmed) return detail::StageItem{std::nullopt, "verification:" + outcome.value().reason};
    return detail::StageItem{pair, {}};
  });

  auto highlighted = detail::run_stage("highlighted", cfg, seeds, verified, [&](std::size_t i) {
    const auto& pair = *verified[i].pair;
    auto outcome = generate_highlights(pair.record(), pair, client, cfg.generation);
    if (!outcome) return detail::StageItem{std::nullopt, "highlight:transport"};
    if (outcome.value().flagged) return detail::StageItem{std::nullopt, "highlight:flagged"};
    return detail::StageItem{outcome.value().pair, {}};
  });

  PipelineResult result;
  auto& stats = result.stats;
  stats.jobs = seeds.size();
  std::vector<PreferencePair> candidates;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (generated[i].pair) {
      ++stats.generated;
    } else {
      ++stats.generation_errors[generated[i].error.substr(0, generated[i].error.find(':', 11))];
    }
    if (verified[i].pair) {
      ++stats.confirmed;
    } else if (generated[i].pair) {
      ++stats.verification_rejects[verified[i].error];
    }
    if (highlighted[i].pair) {
      ++stats.highlighted;
      candidates.push_back(*highlighted[i].pair);
    } else if (verified[i].pair) {
      ++stats.flagged_no_highlights;
    }
  }

  auto [kept, report] = filter_dataset(candidates);
  for (const auto& p : kept) {
    // Audit: every emitted pair re-validates from its serialized form and carries highlights.
    auto reparsed = pair_from_json(to_json(p));
    if (!(reparsed == p) || p.chosen().highlights().empty()) {
      throw std::logic_error("pipeline emitted a pair that fails the final audit");
    }
  }
  result.pairs = std::move(kept);
  result.report = report;

  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream train(cfg.output_dir / "train.jsonl", std::ios::binary | std::ios::trunc);
    for (const auto& p : result.pairs) train << to_json(p).dump() << '\n';
    json report_json = report.to_json();
    report_json["pipeline"] = stats.to_json();
    std::ofstream(cfg.output_dir / "filter_report.json", std::ios::binary | std::ios::trunc) << report_json.dump(2)
                                                                                              << '\n';
  }
  return result;
}

}  // namespace glider
