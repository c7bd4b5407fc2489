#pragma once

// Benchmark datasets and the judge-and-score loop. Pointwise sets report
// Pearson against gold scores, pairwise/binary sets report positive-class F1.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "glider/core.hpp"
#include "glider/json_io.hpp"
#include "glider/llm_client.hpp"
#include "glider/metrics.hpp"
#include "glider/random.hpp"

namespace glider {

enum class BenchmarkKind { Pointwise, Pairwise };

inline std::string_view metric_name(BenchmarkKind kind) { return kind == BenchmarkKind::Pointwise ? "pearson" : "f1"; }

struct BenchItem {
  EvaluationRecord record;
  int gold;
};

class BenchmarkSpec {
 public:
  BenchmarkSpec(std::string name, BenchmarkKind kind, std::vector<BenchItem> items, int repeats = 3)
      : name_(std::move(name)), kind_(kind), items_(std::move(items)), repeats_(repeats) {
    if (name_.empty()) throw ValidationError("bench_name", "benchmark name is empty");
    if (repeats_ < 1) throw ValidationError("repeats_positive", "repeats must be >= 1");
    if (items_.empty()) throw ValidationError("bench_records", "benchmark has no records");
    for (const auto& item : items_) {
      if (!item.record.rubric().contains(item.gold)) {
        throw ValidationError("gold_in_rubric", "gold score " + std::to_string(item.gold) + " is not in the rubric");
      }
      if (kind_ == BenchmarkKind::Pairwise && item.record.rubric().scale() != Scale::Binary) {
        throw ValidationError("pairwise_binary", "pairwise benchmarks need binary rubrics");
      }
    }
  }

  const std::string& name() const noexcept { return name_; }
  BenchmarkKind kind() const noexcept { return kind_; }
  const std::vector<BenchItem>& items() const noexcept { return items_; }
  int repeats() const noexcept { return repeats_; }

  BenchmarkSpec with_repeats(int repeats) const { return BenchmarkSpec(name_, kind_, items_, repeats); }

 private:
  std::string name_;
  BenchmarkKind kind_;
  std::vector<BenchItem> items_;
  int repeats_;
};

struct RepeatResult {
  double value = 0;
  std::size_t n_scored = 0;
  std::size_t parse_failures = 0;
};

struct BenchmarkReport {
  std::string name;
  std::string metric;
  double value = 0;
  double stderr_ = 0;
  std::size_t n = 0;
  /// Fewest records scored in any repeat.
  std::size_t n_scored = 0;
  double parse_failure_rate = 0;
  std::string fingerprint;
  std::vector<RepeatResult> per_repeat;

  json to_json() const {
    json repeats = json::array();
    for (const auto& r : per_repeat) {
      repeats.push_back({{"value", r.value}, {"n_scored", r.n_scored}, {"parse_failures", r.parse_failures}});
    }
    return json{{"name", name},
                {"metric", metric},
                {"value", value},
                {"stderr", stderr_},
                {"n", n},
                {"n_scored", n_scored},
                {"parse_failure_rate", parse_failure_rate},
                {"endpoint_fingerprint", fingerprint},
                {"repeats", repeats}};
  }
};

struct BenchError {
  std::string detail;
  double parse_failure_rate = 0;

  json to_json() const { return json{{"error", "BenchError"}, {"detail", detail}, {"parse_failure_rate", parse_failure_rate}}; }
};

struct BenchOptions {
  double max_parse_failure_rate = 0.5;
  /// Verdicts are scored as the model returns them; no repair prompts.
  int repair_attempts = 0;
  JudgeOptions judge;
  /// Per-record rows are written to `<raw_dir>/<name>.jsonl` when set.
  std::optional<std::filesystem::path> raw_dir;
};

/// Mean of the annotator scores, rounded half away from zero.
inline int summeval_gold(const std::vector<int>& scores) {
  if (scores.empty()) throw ValidationError("annotator_scores_non_empty", "no annotator scores");
  long sum = 0;
  for (int s : scores) {
    if (s < 1 || s > 5) throw ValidationError("annotator_score_range", "annotator scores must be in 1..5");
    sum += s;
  }
  const long n = static_cast<long>(scores.size());
  return static_cast<int>((2 * sum + n) / (2 * n));
}

inline std::string endpoint_fingerprint(const ChatClient& client, const BenchOptions& options,
                                        const TemplateSet& templates = TemplateSet::defaults()) {
  std::string key = client.endpoint_url() + "\n" + client.config().model_name + "\n" +
                    to_json(SamplingConfig::judge(options.judge.max_tokens)).dump() + "\n" + templates.fingerprint();
  return detail::hex64(detail::fnv1a64(key));
}

/// Records of one repeat are judged in parallel (bounded by the client's
/// parallelism); repeats run one after another. Parse failures are left out
/// of the metric and counted in parse_failure_rate.
inline Result<BenchmarkReport, BenchError> run_benchmark(const BenchmarkSpec& spec, ChatClient& client,
                                                         const BenchOptions& options = {},
                                                         const TemplateSet& templates = TemplateSet::defaults()) {
  const auto& items = spec.items();
  const std::size_t n = items.size();
  BenchmarkReport report;
  report.name = spec.name();
  report.metric = std::string(metric_name(spec.kind()));
  report.n = n;
  report.n_scored = n;
  report.fingerprint = endpoint_fingerprint(client, options, templates);

  std::optional<std::ofstream> raw;
  if (options.raw_dir) {
    std::filesystem::create_directories(*options.raw_dir);
    raw.emplace(*options.raw_dir / (spec.name() + ".jsonl"), std::ios::binary | std::ios::trunc);
  }

  std::size_t failures = 0;
  for (int rep = 0; rep < spec.repeats(); ++rep) {
    std::vector<std::optional<int>> scores(n);
    std::vector<std::optional<JudgeError>> errors(n);
    parallel_for(n, client.config().parallelism, [&](std::size_t i) {
      auto outcome = judge(client, items[i].record, options.repair_attempts, options.judge, templates);
      if (outcome) {
        scores[i] = outcome.value().parsed.verdict.score();
      } else {
        errors[i] = outcome.error();
      }
    });

    RepeatResult result;
    std::vector<double> predicted, gold;
    std::vector<int> predicted_labels, gold_labels;
    for (std::size_t i = 0; i < n; ++i) {
      if (raw) {
        json row{{"repeat", rep}, {"index", i}, {"gold", items[i].gold}, {"score", nullptr}};
        if (scores[i]) row["score"] = *scores[i];
        if (errors[i]) row["error"] = errors[i]->to_json();
        *raw << row.dump() << '\n';
      }
      if (errors[i]) {
        if (std::holds_alternative<TransportError>(errors[i]->cause)) {
          return BenchError{"upstream error on record " + std::to_string(i) + ": " +
                                std::get<TransportError>(errors[i]->cause).detail,
                            0};
        }
        ++result.parse_failures;
        continue;
      }
      predicted.push_back(*scores[i]);
      gold.push_back(items[i].gold);
      predicted_labels.push_back(*scores[i]);
      gold_labels.push_back(items[i].gold);
    }
    failures += result.parse_failures;
    result.n_scored = n - result.parse_failures;
    report.n_scored = std::min(report.n_scored, result.n_scored);

    const double rate = static_cast<double>(result.parse_failures) / static_cast<double>(n);
    if (rate > options.max_parse_failure_rate) {
      return BenchError{"parse failure rate " + std::to_string(rate) + " exceeds the limit", rate};
    }
    Result<double, DegenerateInput> value = DegenerateInput{"no scored records"};
    if (!predicted.empty()) {
      value = spec.kind() == BenchmarkKind::Pointwise ? pearson(PairedScores(predicted, gold))
                                                      : f1_binary(predicted_labels, gold_labels);
    }
    if (!value) return BenchError{"metric undefined: " + value.error().detail, rate};
    result.value = value.value();
    report.per_repeat.push_back(result);
  }

  const auto reps = static_cast<double>(report.per_repeat.size());
  double mean = 0;
  for (const auto& r : report.per_repeat) mean += r.value;
  mean /= reps;
  double ss = 0;
  for (const auto& r : report.per_repeat) ss += (r.value - mean) * (r.value - mean);
  report.value = mean;
  report.stderr_ = reps > 1 ? std::sqrt(ss / (reps - 1)) / std::sqrt(reps) : 0.0;
  report.parse_failure_rate = static_cast<double>(failures) / (static_cast<double>(n) * reps);
  return report;
}

// ---------------------------------------------------------------------------
// Dataset adapters

enum class DatasetAdapter {
  FLASK,
  FeedbackBench,
  Summeval,
  BigGenBench,
  HHEval,
  MTBench,
  RewardBench,
  LiveBenchIF,
  MRewardBench,
  GenericJSONL
};

inline const std::vector<std::pair<std::string_view, DatasetAdapter>>& dataset_adapter_names() {
  static const std::vector<std::pair<std::string_view, DatasetAdapter>> names{
      {"flask", DatasetAdapter::FLASK},           {"feedback_bench", DatasetAdapter::FeedbackBench},
      {"summeval", DatasetAdapter::Summeval},     {"biggen_bench", DatasetAdapter::BigGenBench},
      {"hh_eval", DatasetAdapter::HHEval},        {"mt_bench", DatasetAdapter::MTBench},
      {"reward_bench", DatasetAdapter::RewardBench}, {"livebench_if", DatasetAdapter::LiveBenchIF},
      {"m_reward_bench", DatasetAdapter::MRewardBench}, {"generic_jsonl", DatasetAdapter::GenericJSONL}};
  return names;
}

inline std::optional<DatasetAdapter> parse_dataset_adapter(std::string_view name) {
  std::string key;
  for (char c : name) key += c == '-' ? '_' : detail::ascii_lower(c);
  for (const auto& [n, a] : dataset_adapter_names()) {
    std::string flat(n);
    flat.erase(std::remove(flat.begin(), flat.end(), '_'), flat.end());
    std::string key_flat = key;
    key_flat.erase(std::remove(key_flat.begin(), key_flat.end(), '_'), key_flat.end());
    if (key == n || key_flat == flat) return a;
  }
  return std::nullopt;
}

struct SchemaError {
  /// 1-based line of the first bad row; 0 when the file itself is unusable.
  std::size_t line = 0;
  std::string detail;

  json to_json() const { return json{{"error", "SchemaError"}, {"line", line}, {"detail", detail}}; }
};

namespace detail {

struct RowError {
  std::string detail;
};

inline const json* lookup(const json& row, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (row.is_object() && row.contains(k) && !row[k].is_null()) return &row[k];
  }
  return nullptr;
}

inline std::string row_text(const json& row, std::initializer_list<const char*> keys) {
  const json* v = lookup(row, keys);
  if (!v || !v->is_string()) throw RowError{"missing string field '" + std::string(*keys.begin()) + "'"};
  return v->get<std::string>();
}

inline std::optional<std::string> optional_text(const json& row, std::initializer_list<const char*> keys) {
  const json* v = lookup(row, keys);
  if (!v || !v->is_string() || trim(v->get<std::string>()).empty()) return std::nullopt;
  return v->get<std::string>();
}

inline int gold_from(const json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number()) {
    const double d = v.get<double>();
    return static_cast<int>(d < 0 ? -std::floor(-d + 0.5) : std::floor(d + 0.5));
  }
  if (v.is_array()) {
    std::vector<int> scores;
    for (const auto& s : v) scores.push_back(gold_from(s));
    return summeval_gold(scores);
  }
  if (v.is_string()) {
    if (auto i = parse_int(trim(v.get<std::string>()))) return *i;
  }
  throw RowError{"gold score is not a number"};
}

// Prometheus-style absolute grading rows (FLASK, Feedback Bench, BiGGen Bench).
inline BenchItem absolute_row(const json& row) {
  const json empty = json::object();
  const json& rubric = row.contains("score_rubric") && row["score_rubric"].is_object() ? row["score_rubric"] : empty;
  std::vector<DataField> fields{{"USER_INPUT", row_text(row, {"orig_instruction", "instruction", "input"})},
                                {"MODEL_OUTPUT", row_text(row, {"orig_response", "response", "output"})}};
  if (auto ref = optional_text(row, {"orig_reference_answer", "reference_answer", "reference"})) {
    fields.push_back({"GOLD_ANSWER", *ref});
  }
  std::string criteria;
  if (auto c = optional_text(row, {"orig_criteria", "criteria"})) {
    criteria = *c;
  } else {
    criteria = row_text(rubric, {"criteria"});
  }
  std::map<int, std::string> desc;
  for (int k = 1; k <= 5; ++k) {
    const std::string key = "score" + std::to_string(k) + "_description";
    const std::string orig = "orig_" + key;
    const json* v = lookup(row, {orig.c_str(), key.c_str()});
    if (!v) v = lookup(rubric, {key.c_str()});
    if (!v || !v->is_string()) throw RowError{"missing '" + key + "'"};
    desc[k] = v->get<std::string>();
  }
  const json* gold = lookup(row, {"gold", "orig_score", "human_score", "score"});
  if (!gold) throw RowError{"missing gold score"};
  return {EvaluationRecord(std::move(fields), criteria, Rubric(Scale::Likert5, std::move(desc))), gold_from(*gold)};
}

inline const std::map<std::string, std::string>& summeval_criteria() {
  static const std::map<std::string, std::string> c{
      {"coherence", "Is the SUMMARY well-structured and well-organized, building a coherent body of information?"},
      {"consistency", "Is the SUMMARY factually consistent with the DOCUMENT, without hallucinated facts?"},
      {"fluency", "Is the SUMMARY fluent, free of grammatical and formatting problems?"},
      {"relevance", "Does the SUMMARY select the important content of the DOCUMENT without redundancy?"}};
  return c;
}

inline std::vector<BenchItem> summeval_rows(const json& row) {
  std::vector<DataField> fields{{"DOCUMENT", row_text(row, {"text", "document", "source"})},
                                {"SUMMARY", row_text(row, {"summary", "decoded", "machine_summary"})}};
  std::map<std::string, std::vector<int>> per_metric;
  if (const json* ann = lookup(row, {"expert_annotations"})) {
    if (!ann->is_array()) throw RowError{"expert_annotations must be an array"};
    for (const auto& a : *ann) {
      for (const auto& [metric, crit] : summeval_criteria()) {
        if (a.contains(metric)) per_metric[metric].push_back(gold_from(a[metric]));
      }
    }
  } else if (const json* scores = lookup(row, {"expert_scores"})) {
    for (const auto& [metric, crit] : summeval_criteria()) {
      if (scores->contains(metric)) {
        for (const auto& s : (*scores)[metric]) per_metric[metric].push_back(gold_from(s));
      }
    }
  } else {
    throw RowError{"missing expert_annotations"};
  }
  if (per_metric.empty()) throw RowError{"no recognised summeval metric"};
  std::vector<BenchItem> items;
  for (const auto& [metric, scores] : per_metric) {
    std::map<int, std::string> desc{{1, "The SUMMARY is very poor in " + metric + "."},
                                    {2, "The SUMMARY is poor in " + metric + "."},
                                    {3, "The SUMMARY is acceptable in " + metric + "."},
                                    {4, "The SUMMARY is good in " + metric + "."},
                                    {5, "The SUMMARY is excellent in " + metric + "."}};
    EvaluationRecord record(fields, summeval_criteria().at(metric), Rubric(Scale::Likert5, std::move(desc)),
                            Metadata{{"metric", metric}});
    items.push_back({std::move(record), summeval_gold(scores)});
  }
  return items;
}

inline std::string pairwise_criteria() {
  return "Which response better answers the USER_INPUT: is RESPONSE_A more helpful, accurate and harmless than "
         "RESPONSE_B?";
}

/// Candidate order is a function of (seed, row index); gold follows it.
inline BenchItem pairwise_item(std::string input, std::string better, std::string worse, std::uint64_t seed,
                               std::size_t index) {
  const bool better_first = (mix_seed(seed ^ mix_seed(index + 1)) & 1U) == 0;
  std::vector<DataField> fields{{"USER_INPUT", std::move(input)},
                                {"RESPONSE_A", better_first ? better : worse},
                                {"RESPONSE_B", better_first ? worse : better}};
  Rubric rubric(Scale::Binary, {{0, "RESPONSE_B better satisfies the pass criteria than RESPONSE_A"},
                                {1, "RESPONSE_A better satisfies the pass criteria than RESPONSE_B"}});
  return {EvaluationRecord(std::move(fields), pairwise_criteria(), std::move(rubric)), better_first ? 1 : 0};
}

}  // namespace detail

/// Reads a JSONL benchmark file through the named adapter. Pairwise sources
/// become binary records with RESPONSE_A/RESPONSE_B in an order drawn from
/// `seed`; MT-Bench ties are skipped.
inline Result<BenchmarkSpec, SchemaError> load_dataset(const std::filesystem::path& path, DatasetAdapter adapter,
                                                       std::uint64_t seed = 0, int repeats = 3) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return SchemaError{0, "cannot read dataset " + path.string()};
  std::vector<BenchItem> items;
  BenchmarkKind kind = BenchmarkKind::Pointwise;
  switch (adapter) {
    case DatasetAdapter::HHEval:
    case DatasetAdapter::MTBench:
    case DatasetAdapter::RewardBench:
    case DatasetAdapter::MRewardBench:
    case DatasetAdapter::LiveBenchIF: kind = BenchmarkKind::Pairwise; break;
    default: break;
  }
  std::optional<BenchmarkKind> generic_kind;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::size_t index = line_no - 1;
    try {
      json row = json::parse(line);
      if (!row.is_object()) throw detail::RowError{"row is not a JSON object"};
      switch (adapter) {
        case DatasetAdapter::GenericJSONL: {
          const json* gold = detail::lookup(row, {"gold"});
          if (!gold) throw detail::RowError{"missing 'gold'"};
          items.push_back({record_from_json(detail::require(row, "record")), detail::gold_from(*gold)});
          if (row.contains("kind")) {
            auto k = row["kind"].get<std::string>();
            if (k != "pointwise" && k != "pairwise") throw detail::RowError{"kind must be pointwise or pairwise"};
            generic_kind = k == "pairwise" ? BenchmarkKind::Pairwise : BenchmarkKind::Pointwise;
          }
          break;
        }
        case DatasetAdapter::FLASK:
        case DatasetAdapter::FeedbackBench:
        case DatasetAdapter::BigGenBench: items.push_back(detail::absolute_row(row)); break;
        case DatasetAdapter::Summeval:
          for (auto& item : detail::summeval_rows(row)) items.push_back(std::move(item));
          break;
        case DatasetAdapter::HHEval: {
          const json& targets = detail::require(row, "targets");
          const auto& choices = detail::require(targets, "choices");
          const auto& labels = detail::require(targets, "labels");
          if (!choices.is_array() || choices.size() != 2 || !labels.is_array() || labels.size() != 2) {
            throw detail::RowError{"targets must hold two choices and two labels"};
          }
          const bool first_better = labels[0].get<int>() > labels[1].get<int>();
          items.push_back(detail::pairwise_item(detail::row_text(row, {"input"}),
                                                choices[first_better ? 0 : 1].get<std::string>(),
                                                choices[first_better ? 1 : 0].get<std::string>(), seed, index));
          break;
        }
        case DatasetAdapter::MTBench: {
          const auto winner = detail::row_text(row, {"winner"});
          if (winner == "tie" || winner.rfind("tie", 0) == 0) break;
          if (winner != "model_a" && winner != "model_b") throw detail::RowError{"winner must be model_a, model_b or tie"};
          auto a = detail::row_text(row, {"response_a", "answer_a"});
          auto b = detail::row_text(row, {"response_b", "answer_b"});
          const bool a_wins = winner == "model_a";
          items.push_back(detail::pairwise_item(detail::row_text(row, {"question", "prompt"}), a_wins ? a : b,
                                                a_wins ? b : a, seed, index));
          break;
        }
        case DatasetAdapter::RewardBench:
        case DatasetAdapter::MRewardBench:
          items.push_back(detail::pairwise_item(detail::row_text(row, {"prompt"}), detail::row_text(row, {"chosen"}),
                                                detail::row_text(row, {"rejected"}), seed, index));
          break;
        case DatasetAdapter::LiveBenchIF: {
          std::vector<DataField> fields{{"USER_INPUT", detail::row_text(row, {"prompt", "instruction"})},
                                        {"RESPONSE", detail::row_text(row, {"response", "output"})}};
          const json* label = detail::lookup(row, {"label", "score", "followed"});
          if (!label) throw detail::RowError{"missing 'label'"};
          const int gold = label->is_boolean() ? (label->get<bool>() ? 1 : 0) : detail::gold_from(*label);
          Rubric rubric(Scale::Binary, {{0, "The RESPONSE fails at least one instruction in the USER_INPUT."},
                                        {1, "The RESPONSE follows every instruction in the USER_INPUT."}});
          items.push_back({EvaluationRecord(std::move(fields),
                                            "Does the RESPONSE follow all of the instructions given in the USER_INPUT?",
                                            std::move(rubric)),
                           gold});
          break;
        }
      }
      if (!items.empty() && !items.back().record.rubric().contains(items.back().gold)) {
        throw detail::RowError{"gold score is not in the rubric"};
      }
    } catch (const detail::RowError& e) {
      return SchemaError{line_no, e.detail};
    } catch (const std::exception& e) {
      return SchemaError{line_no, e.what()};
    }
  }
  if (items.empty()) return SchemaError{0, "dataset has no usable rows"};
  if (generic_kind) kind = *generic_kind;
  try {
    return BenchmarkSpec(path.stem().string(), kind, std::move(items), repeats);
  } catch (const ValidationError& e) {
    return SchemaError{0, e.what()};
  }
}

}  // namespace glider
