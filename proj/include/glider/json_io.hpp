#pragma once

// JSON mapping of the core types. Records follow the JSONL record schema:
// {"data_fields":[["TAG","body"],...],"pass_criteria":str,
//  "rubric":{"scale":"binary|likert3|likert5","descriptions":{"0":str,...}},
//  "metadata":{...}}

#include <charconv>
#include <string>

#include <nlohmann/json.hpp>

#include "glider/core.hpp"

namespace glider {

using json = nlohmann::json;

namespace detail {

inline const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError("schema", std::string("missing field '") + key + "'");
  }
  return obj.at(key);
}

inline std::string require_string(const json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_string()) throw ValidationError("schema", std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

// Strict base-10 integer; rejects "1.0", " 1", "+", "".
inline std::optional<int> parse_int(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

// Emits integral doubles as JSON integers so 0.0 serializes as `0`.
inline json number_json(double v) {
  if (v == static_cast<double>(static_cast<long long>(v)) && v > -1e15 && v < 1e15) {
    return static_cast<long long>(v);
  }
  return v;
}

}  // namespace detail

inline json to_json(const Rubric& rubric) {
  json desc = json::object();
  for (const auto& [score, text] : rubric.descriptions()) desc[std::to_string(score)] = text;
  return json{{"scale", std::string(scale_name(rubric.scale()))}, {"descriptions", desc}};
}

inline Rubric rubric_from_json(const json& j) {
  auto scale = parse_scale(detail::require_string(j, "scale"));
  if (!scale) throw ValidationError("schema", "unknown rubric scale");
  const auto& desc = detail::require(j, "descriptions");
  if (!desc.is_object()) throw ValidationError("schema", "rubric descriptions must be an object");
  std::map<int, std::string> out;
  for (const auto& [key, value] : desc.items()) {
    auto score = detail::parse_int(key);
    if (!score) throw ValidationError("integer_scores", "rubric key '" + key + "' is not an integer");
    if (!value.is_string()) throw ValidationError("schema", "rubric description must be a string");
    out[*score] = value.get<std::string>();
  }
  return Rubric(*scale, std::move(out));
}

inline json to_json(const EvaluationRecord& record) {
  json fields = json::array();
  for (const auto& f : record.data_fields()) fields.push_back(json::array({f.tag, f.body}));
  json meta = json::object();
  for (const auto& [k, v] : record.metadata()) meta[k] = v;
  return json{{"data_fields", fields},
              {"pass_criteria", record.pass_criteria()},
              {"rubric", to_json(record.rubric())},
              {"metadata", meta}};
}

inline EvaluationRecord record_from_json(const json& j) {
  const auto& fields = detail::require(j, "data_fields");
  if (!fields.is_array()) throw ValidationError("schema", "data_fields must be an array");
  std::vector<DataField> data;
  for (const auto& f : fields) {
    if (!f.is_array() || f.size() != 2 || !f[0].is_string() || !f[1].is_string()) {
      throw ValidationError("schema", "each data field must be a [tag, body] string pair");
    }
    data.push_back({f[0].get<std::string>(), f[1].get<std::string>()});
  }
  Metadata meta;
  if (j.contains("metadata")) {
    const auto& m = j.at("metadata");
    if (!m.is_object()) throw ValidationError("schema", "metadata must be an object");
    for (const auto& [k, v] : m.items()) meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  return EvaluationRecord(std::move(data), detail::require_string(j, "pass_criteria"),
                          rubric_from_json(detail::require(j, "rubric")), std::move(meta));
}

inline json to_json(const JudgeVerdict& v) {
  return json{{"reasoning", v.reasoning()}, {"highlights", v.highlights()}, {"score", v.score()}};
}

inline JudgeVerdict verdict_from_json(const json& j) {
  const auto& reasoning = detail::require(j, "reasoning");
  const auto& highlights = detail::require(j, "highlights");
  const auto& score = detail::require(j, "score");
  if (!reasoning.is_array() || !highlights.is_array()) {
    throw ValidationError("schema", "reasoning and highlights must be arrays");
  }
  if (!score.is_number_integer()) throw ValidationError("integer_scores", "score must be an integer");
  std::vector<std::string> r, h;
  for (const auto& x : reasoning) {
    if (!x.is_string()) throw ValidationError("schema", "reasoning items must be strings");
    r.push_back(x.get<std::string>());
  }
  for (const auto& x : highlights) {
    if (!x.is_string()) throw ValidationError("schema", "highlight items must be strings");
    h.push_back(x.get<std::string>());
  }
  return JudgeVerdict(std::move(r), std::move(h), score.get<int>());
}

inline json to_json(const PreferencePair& p) {
  return json{{"record", to_json(p.record())},
              {"chosen", to_json(p.chosen())},
              {"rejected", to_json(p.rejected())}};
}

inline PreferencePair pair_from_json(const json& j) {
  return PreferencePair(record_from_json(detail::require(j, "record")),
                        verdict_from_json(detail::require(j, "chosen")),
                        verdict_from_json(detail::require(j, "rejected")));
}

inline json to_json(const SamplingConfig& s) {
  json j{{"temperature", detail::number_json(s.temperature())},
         {"top_p", detail::number_json(s.top_p())},
         {"max_tokens", s.max_tokens()}};
  if (s.seed()) j["seed"] = *s.seed();
  return j;
}

}  // namespace glider
