#pragma once

// Prompt rendering. The judge template and the generator system prompt are
// normative down to whitespace; every template is kept as a checked-in file
// under templates/ and verified against the embedded copy when loaded.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "glider/core.hpp"
#include "glider/detail/embedded_templates.hpp"
#include "glider/taxonomy.hpp"

namespace glider {

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A `{name}`-placeholder template. Braces that do not enclose a
/// lower-case identifier are literal text.
class PromptTemplate {
 public:
  PromptTemplate(std::string name, std::string body, std::set<std::string> allowed,
                 bool each_exactly_once)
      : name_(std::move(name)), body_(std::move(body)) {
    std::map<std::string, int> counts;
    for (const auto& p : scan()) {
      if (!allowed.count(p.name)) {
        throw ValidationError("template_placeholders",
                              name_ + ": unknown placeholder {" + p.name + "}");
      }
      ++counts[p.name];
    }
    if (each_exactly_once) {
      for (const auto& a : allowed) {
        if (counts[a] != 1) {
          throw ValidationError("template_placeholders",
                                name_ + ": {" + a + "} must appear exactly once");
        }
      }
    }
  }

  const std::string& name() const noexcept { return name_; }
  const std::string& body() const noexcept { return body_; }

  /// Single-pass substitution; substituted text is never rescanned.
  std::string render(const std::map<std::string, std::string>& values) const {
    std::string out;
    std::size_t pos = 0;
    for (const auto& p : scan()) {
      auto it = values.find(p.name);
      if (it == values.end()) throw TemplateError(name_ + ": no value for {" + p.name + "}");
      out.append(body_, pos, p.begin - pos);
      out += it->second;
      pos = p.end;
    }
    out.append(body_, pos, std::string::npos);
    return out;
  }

 private:
  struct Placeholder {
    std::size_t begin;
    std::size_t end;
    std::string name;
  };

  std::vector<Placeholder> scan() const {
    std::vector<Placeholder> out;
    for (std::size_t i = 0; i < body_.size(); ++i) {
      if (body_[i] != '{') continue;
      std::size_t j = i + 1;
      while (j < body_.size() && ((body_[j] >= 'a' && body_[j] <= 'z') || body_[j] == '_')) ++j;
      if (j > i + 1 && j < body_.size() && body_[j] == '}') {
        out.push_back({i, j + 1, body_.substr(i + 1, j - i - 1)});
        i = j;
      }
    }
    return out;
  }

  std::string name_;
  std::string body_;
};

/// The six prompt templates used by the toolkit.
class TemplateSet {
 public:
  static constexpr std::array<std::string_view, 6> kNames{"judge",        "gen_system", "gen_pointwise",
                                                          "gen_pairwise", "verify",     "highlight"};

  static std::string_view embedded(std::string_view name) {
    if (name == "judge") return detail::k_judge_template;
    if (name == "gen_system") return detail::k_gen_system_template;
    if (name == "gen_pointwise") return detail::k_gen_pointwise_template;
    if (name == "gen_pairwise") return detail::k_gen_pairwise_template;
    if (name == "verify") return detail::k_verify_template;
    if (name == "highlight") return detail::k_highlight_template;
    throw TemplateError("unknown template " + std::string(name));
  }

  static TemplateSet builtin() {
    std::map<std::string, std::string> bodies;
    for (auto n : kNames) bodies.emplace(n, std::string(embedded(n)));
    return TemplateSet(std::move(bodies));
  }

  /// Reads `<dir>/<name>.txt` for every template. With `verify`, each file
  /// must hash identically to the shipped copy.
  static TemplateSet load(const std::filesystem::path& dir, bool verify = true) {
    std::map<std::string, std::string> bodies;
    for (auto n : kNames) {
      auto path = dir / (std::string(n) + ".txt");
      std::ifstream in(path, std::ios::binary);
      if (!in) throw TemplateError("cannot read template " + path.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      std::string body = ss.str();
      if (verify && detail::fnv1a64(body) != detail::fnv1a64(embedded(n))) {
        throw TemplateError("template " + path.string() + " failed hash verification (expected " +
                            detail::hex64(detail::fnv1a64(embedded(n))) + ", got " +
                            detail::hex64(detail::fnv1a64(body)) + ")");
      }
      bodies.emplace(n, std::move(body));
    }
    return TemplateSet(std::move(bodies));
  }

  /// GLIDER_TEMPLATE_DIR overrides the shipped templates;
  /// GLIDER_TEMPLATE_VERIFY=0 disables hash verification for custom wording.
  static const TemplateSet& defaults() {
    static const TemplateSet set = [] {
      const char* dir = std::getenv("GLIDER_TEMPLATE_DIR");
      if (dir == nullptr || *dir == '\0') return builtin();
      const char* verify = std::getenv("GLIDER_TEMPLATE_VERIFY");
      return load(dir, verify == nullptr || std::string(verify) != "0");
    }();
    return set;
  }

  const PromptTemplate& judge() const { return judge_; }
  const std::string& gen_system() const { return gen_system_; }
  const PromptTemplate& gen_pointwise() const { return gen_pointwise_; }
  const PromptTemplate& gen_pairwise() const { return gen_pairwise_; }
  const PromptTemplate& verify() const { return verify_; }
  const PromptTemplate& highlight() const { return highlight_; }

  /// Hash over all template bodies, used in benchmark fingerprints.
  std::string fingerprint() const {
    std::string all = judge_.body() + '\0' + gen_system_ + '\0' + gen_pointwise_.body() + '\0' +
                      gen_pairwise_.body() + '\0' + verify_.body() + '\0' + highlight_.body();
    return detail::hex64(detail::fnv1a64(all));
  }

 private:
  explicit TemplateSet(std::map<std::string, std::string> b)
      : judge_("judge", b.at("judge"), {"user_input", "pass_criteria", "rubric"}, true),
        gen_system_(b.at("gen_system")),
        gen_pointwise_("gen_pointwise", b.at("gen_pointwise"),
                       {"domain", "metrics", "tag_list", "word_count", "content_kind",
                        "multimetric_instruction", "scale_name", "score_keys", "data_skeleton"},
                       true),
        gen_pairwise_("gen_pairwise", b.at("gen_pairwise"),
                      {"domain", "metrics", "tag_list", "word_count", "content_kind",
                       "multimetric_instruction", "data_skeleton"},
                      true),
        verify_("verify", b.at("verify"),
                {"data", "pass_criteria", "rubric", "chosen_score", "chosen_reasoning", "rejected_score",
                 "rejected_reasoning"},
                true),
        highlight_("highlight", b.at("highlight"), {"data", "pass_criteria", "rubric", "score", "reasoning"},
                   true) {}

  PromptTemplate judge_;
  std::string gen_system_;
  PromptTemplate gen_pointwise_;
  PromptTemplate gen_pairwise_;
  PromptTemplate verify_;
  PromptTemplate highlight_;
};

inline std::string build_judge_prompt(const EvaluationRecord& record,
                                      const TemplateSet& templates = TemplateSet::defaults()) {
  return templates.judge().render({{"user_input", record_data_section(record)},
                                   {"pass_criteria", record.pass_criteria()},
                                   {"rubric", rubric_render(record.rubric())}});
}

inline std::string build_generation_system_prompt(const TemplateSet& templates = TemplateSet::defaults()) {
  return templates.gen_system();
}

namespace detail {

inline std::string bullet_lines(const std::vector<std::string>& bullets) {
  std::string out;
  for (const auto& b : bullets) {
    if (!out.empty()) out += '\n';
    out += "- " + b;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

inline std::string scale_description(Scale s) {
  switch (s) {
    case Scale::Binary: return "binary (0 or 1)";
    case Scale::Likert3: return "1-3 Likert";
    case Scale::Likert5: return "1-5 Likert";
  }
  return "";
}

inline void generation_common(const GenerationJob& job, std::map<std::string, std::string>& values,
                                     const std::vector<std::string>& skeleton_tags) {
  std::string metrics;
  for (const auto& m : job.metrics) {
    if (!metrics.empty()) metrics += '\n';
    metrics += "- " + m.name + ": " + m.definition;
  }
  std::vector<std::string> skeleton;
  for (const auto& tag : skeleton_tags) skeleton.push_back("<" + tag + ">\n[Content for " + tag + "]\n</" + tag + ">");
  values["domain"] = job.domain;
  values["metrics"] = metrics;
  values["tag_list"] = join(skeleton_tags, ", ");
  values["word_count"] = std::to_string(job.target_words);
  values["content_kind"] = job.is_code
                               ? "The evaluated text must be code written in a programming language that fits the domain, "
                                 "and the other tags must describe or accompany that code."
                               : "The data must be written as natural text, not code.";
  values["multimetric_instruction"] =
      job.is_multimetric()
          ? " The pass criteria and the rubric must include all of the metrics listed above, and the scores must "
            "account for every one of them."
          : "";
  values["data_skeleton"] = join(skeleton, "\n");
}

}  // namespace detail

inline std::string build_pointwise_generation_prompt(const GenerationJob& job,
                                                     const TemplateSet& templates = TemplateSet::defaults()) {
  std::map<std::string, std::string> values;
  detail::generation_common(job, values, job.tag_names());
  std::vector<std::string> keys;
  for (int k : scale_keys(job.scale)) keys.push_back(std::to_string(k));
  values["scale_name"] = detail::scale_description(job.scale);
  values["score_keys"] = detail::join(keys, ", ");
  return templates.gen_pointwise().render(values);
}

/// The candidate responses are produced in their own tags, so only the
/// non-output tags appear in the data skeleton.
inline std::string build_pairwise_generation_prompt(const GenerationJob& job,
                                                    const TemplateSet& templates = TemplateSet::defaults()) {
  std::map<std::string, std::string> values;
  std::vector<std::string> shared;
  for (const auto& t : job.tags)
    if (t.role != TagRole::Output) shared.push_back(t.name);
  detail::generation_common(job, values, shared);
  return templates.gen_pairwise().render(values);
}

inline std::string build_verification_prompt(const EvaluationRecord& record, const PreferencePair& pair,
                                             const TemplateSet& templates = TemplateSet::defaults()) {
  if (!(pair.record() == record)) throw std::invalid_argument("pair does not belong to the record");
  return templates.verify().render({{"data", record_data_section(record)},
                                    {"pass_criteria", record.pass_criteria()},
                                    {"rubric", rubric_render(record.rubric())},
                                    {"chosen_score", std::to_string(pair.chosen().score())},
                                    {"chosen_reasoning", detail::bullet_lines(pair.chosen().reasoning())},
                                    {"rejected_score", std::to_string(pair.rejected().score())},
                                    {"rejected_reasoning", detail::bullet_lines(pair.rejected().reasoning())}});
}

inline std::string build_highlight_prompt(const EvaluationRecord& record, const JudgeVerdict& verdict,
                                          const TemplateSet& templates = TemplateSet::defaults()) {
  return templates.highlight().render({{"data", record_data_section(record)},
                                       {"pass_criteria", record.pass_criteria()},
                                       {"rubric", rubric_render(record.rubric())},
                                       {"score", std::to_string(verdict.score())},
                                       {"reasoning", detail::bullet_lines(verdict.reasoning())}});
}

}  // namespace glider
