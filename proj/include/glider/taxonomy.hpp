#pragma once

// Domain/metric taxonomy and the generation job description that the
// prompting and datagen modules share.

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "glider/core.hpp"
#include "glider/json_io.hpp"

namespace glider {

class Taxonomy {
 public:
  using DomainMap = std::map<std::string, std::vector<std::string>>;
  using MetricMap = std::map<std::string, std::map<std::string, std::string>>;

  Taxonomy(DomainMap domains, MetricMap metrics, std::set<std::string> require_code)
      : domains_(std::move(domains)), metrics_(std::move(metrics)), require_code_(std::move(require_code)) {
    std::set<std::string> known;
    for (const auto& [category, names] : domains_) {
      for (const auto& name : names) {
        if (detail::trim(name).empty()) throw ValidationError("taxonomy_names", "empty domain name");
        if (known.insert(name).second) all_domains_.push_back(name);
      }
    }
    for (const auto& name : require_code_) {
      if (!known.count(name)) {
        throw ValidationError("require_code_subset", "'" + name + "' is not a listed domain");
      }
    }
    for (const auto& [category, defs] : metrics_) {
      for (const auto& [name, definition] : defs) {
        if (detail::trim(definition).empty()) {
          throw ValidationError("metric_definition_non_empty", "metric '" + name + "' has no definition");
        }
        all_metrics_.emplace_back(name, definition);
      }
    }
    if (all_domains_.empty() || all_metrics_.empty()) {
      throw ValidationError("taxonomy_non_empty", "taxonomy needs at least one domain and one metric");
    }
  }

  static Taxonomy from_json(const json& j) {
    DomainMap domains = detail::require(j, "domains").get<DomainMap>();
    MetricMap metrics = detail::require(j, "metrics").get<MetricMap>();
    std::set<std::string> code;
    if (j.contains("require_code")) code = j.at("require_code").get<std::set<std::string>>();
    return Taxonomy(std::move(domains), std::move(metrics), std::move(code));
  }

  static Taxonomy load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open taxonomy file " + path);
    return from_json(json::parse(in));
  }

  const DomainMap& domains() const noexcept { return domains_; }
  const MetricMap& metrics() const noexcept { return metrics_; }
  const std::set<std::string>& require_code() const noexcept { return require_code_; }

  /// Deduplicated domain names in category order.
  const std::vector<std::string>& all_domains() const noexcept { return all_domains_; }
  /// (name, definition) in category order.
  const std::vector<std::pair<std::string, std::string>>& all_metrics() const noexcept { return all_metrics_; }

  bool requires_code(const std::string& domain) const { return require_code_.count(domain) != 0; }

 private:
  DomainMap domains_;
  MetricMap metrics_;
  std::set<std::string> require_code_;
  std::vector<std::string> all_domains_;
  std::vector<std::pair<std::string, std::string>> all_metrics_;
};

enum class TagRole { Context, Input, Output, GoldAnswer };

inline std::string_view role_name(TagRole role) {
  switch (role) {
    case TagRole::Context: return "context";
    case TagRole::Input: return "input";
    case TagRole::Output: return "output";
    case TagRole::GoldAnswer: return "gold_answer";
  }
  return "";
}

/// 15 candidate tag names per role.
inline const std::array<std::string_view, 15>& tag_pool(TagRole role) {
  static constexpr std::array<std::string_view, 15> context{
      "CONTEXT", "DOCUMENT", "RETRIEVED_CONTEXT", "BACKGROUND", "PASSAGE",
      "REFERENCE_DOCUMENT", "SOURCE_TEXT", "ARTICLE", "KNOWLEDGE_BASE", "RETRIEVED_DOCUMENTS",
      "CONVERSATION_HISTORY", "EVIDENCE", "TRANSCRIPT", "POLICY", "SUPPORTING_TEXT"};
  static constexpr std::array<std::string_view, 15> input{
      "USER_INPUT", "USER INPUT", "QUESTION", "PROMPT", "QUERY",
      "INSTRUCTION", "USER_QUERY", "REQUEST", "TASK", "INPUT",
      "USER_MESSAGE", "CUSTOMER_QUERY", "PATIENT_QUESTION", "INPUT_TEXT", "USER_PROMPT"};
  static constexpr std::array<std::string_view, 15> output{
      "MODEL_OUTPUT", "MODEL OUTPUT", "RESPONSE", "ANSWER", "ASSISTANT_RESPONSE",
      "OUTPUT", "GENERATED_TEXT", "COMPLETION", "MODEL_RESPONSE", "REPLY",
      "SUMMARY", "AI_RESPONSE", "CHATBOT_REPLY", "GENERATION", "SYSTEM_OUTPUT"};
  static constexpr std::array<std::string_view, 15> gold{
      "GOLD_ANSWER", "REFERENCE_ANSWER", "EXPECTED_OUTPUT", "GROUND_TRUTH", "IDEAL_RESPONSE",
      "CORRECT_ANSWER", "GOLD_STANDARD", "REFERENCE", "TARGET", "EXPECTED_ANSWER",
      "GOLD_RESPONSE", "REFERENCE_OUTPUT", "LABEL", "ANNOTATED_ANSWER", "TRUE_ANSWER"};
  switch (role) {
    case TagRole::Context: return context;
    case TagRole::Input: return input;
    case TagRole::Output: return output;
    case TagRole::GoldAnswer: return gold;
  }
  return context;
}

struct TagAssignment {
  TagRole role;
  std::string name;

  friend bool operator==(const TagAssignment&, const TagAssignment&) = default;
};

struct MetricRef {
  std::string name;
  std::string definition;

  friend bool operator==(const MetricRef&, const MetricRef&) = default;
};

enum class JobMode { Pointwise, Pairwise };

/// One unit of synthetic data generation. More than one metric makes the job
/// multimetric.
struct GenerationJob {
  std::string domain;
  std::vector<MetricRef> metrics;
  Scale scale = Scale::Binary;
  std::vector<TagAssignment> tags;
  int target_words = 0;
  bool is_code = false;
  JobMode mode = JobMode::Pointwise;
  std::uint64_t seed = 0;

  bool is_multimetric() const { return metrics.size() > 1; }

  std::vector<std::string> tag_names() const {
    std::vector<std::string> out;
    for (const auto& t : tags) out.push_back(t.name);
    return out;
  }

  const TagAssignment* find_role(TagRole role) const {
    for (const auto& t : tags)
      if (t.role == role) return &t;
    return nullptr;
  }

  friend bool operator==(const GenerationJob&, const GenerationJob&) = default;
};

/// Candidate tag names for the two responses of a pairwise job.
inline std::pair<std::string, std::string> pairwise_candidate_tags(const GenerationJob& job) {
  const auto* out = job.find_role(TagRole::Output);
  std::string base = out ? out->name : std::string("RESPONSE");
  std::string sep = base.find(' ') != std::string::npos ? " " : "_";
  return {base + sep + "A", base + sep + "B"};
}

}  // namespace glider
