#pragma once

// Command-line front end. Results go to stdout as JSON, diagnostics to
// stderr. Exit codes: 0 success, 1 domain error, 2 usage error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glider/bench.hpp"
#include "glider/datagen.hpp"
#include "glider/http_transport.hpp"
#include "glider/loss.hpp"
#include "glider/metrics.hpp"
#include "glider/service.hpp"

namespace glider {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string unquote(std::string_view v) {
  v = trim(v);
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    return std::string(v.substr(1, v.size() - 2));
  }
  return std::string(v);
}

inline std::string strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return std::string(line.substr(0, i));
    }
  }
  return std::string(line);
}

inline int config_int(const std::string& key, const std::string& value) {
  auto v = parse_int(value);
  if (!v) throw ConfigError("endpoint key '" + key + "' needs an integer, got '" + value + "'");
  return *v;
}

}  // namespace detail

/// `key = value` lines; `#` comments, quoted strings and `[section]` headers
/// are accepted. Keys: base_url, model, api_key_env, timeout_ms,
/// max_retries, parallelism, retry_backoff_ms.
inline EndpointConfig parse_endpoint_config(std::string_view text) {
  EndpointConfig cfg;
  std::size_t line_no = 0;
  for (auto raw : detail::split_lines(text)) {
    ++line_no;
    auto line = detail::strip_comment(raw);
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '[') continue;
    auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(detail::trim(t.substr(0, eq)));
    const std::string value = detail::unquote(t.substr(eq + 1));
    if (key == "base_url") {
      cfg.base_url = value;
    } else if (key == "model" || key == "model_name") {
      cfg.model_name = value;
    } else if (key == "api_key_env") {
      cfg.api_key_env = value;
    } else if (key == "timeout_ms") {
      cfg.timeout = std::chrono::milliseconds(detail::config_int(key, value));
    } else if (key == "max_retries") {
      cfg.max_retries = detail::config_int(key, value);
    } else if (key == "parallelism") {
      cfg.parallelism = detail::config_int(key, value);
    } else if (key == "retry_backoff_ms") {
      cfg.retry_backoff = std::chrono::milliseconds(detail::config_int(key, value));
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline EndpointConfig load_endpoint_config(const std::string& path) { return parse_endpoint_config(read_file(path)); }

namespace detail {

struct CliState {
  std::ostream& out;
  std::ostream& err;
};

inline int fail(CliState& s, const json& error) {
  s.out << error.dump() << '\n';
  return 1;
}

inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::vector<json> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    auto row = json::parse(line, nullptr, false);
    if (row.is_discarded()) throw ConfigError(path + ":" + std::to_string(n) + ": not valid JSON");
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ChatClient make_client(const std::string& endpoint_path) {
  return ChatClient(load_endpoint_config(endpoint_path), make_http_transport());
}

}  // namespace detail

inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  CLI::App app{"Judge records, generate preference data, run benchmarks and audit the alignment loss.", "glider"};
  app.require_subcommand(1);
  detail::CliState state{out, err};

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Judge one record and print the verdict");
  std::string record_path, endpoint_path;
  int repair_attempts = kDefaultRepairAttempts;
  bool lenient = false;
  evaluate->add_option("--record", record_path, "Record JSON file")->required();
  evaluate->add_option("--endpoint", endpoint_path, "Endpoint config file")->required();
  evaluate->add_option("--repair-attempts", repair_attempts, "Corrective re-asks on malformed output")
      ->check(CLI::Range(0, kMaxServiceRepairAttempts));
  evaluate->add_flag("--lenient", lenient, "Drop highlight spans that are not in the data instead of failing");

  // generate
  auto* generate = app.add_subcommand("generate", "Run the synthetic preference-data pipeline");
  std::string taxonomy_path, out_dir, checkpoint_dir;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  int gen_parallelism = 0;
  generate->add_option("--taxonomy", taxonomy_path, "Taxonomy JSON file")->required();
  generate->add_option("--endpoint", endpoint_path, "Generator endpoint config")->required();
  generate->add_option("--count", count, "Number of jobs")->required();
  generate->add_option("--seed", seed, "Base seed");
  generate->add_option("--out", out_dir, "Output directory")->required();
  generate->add_option("--checkpoint", checkpoint_dir, "Stage checkpoint directory (resumable)");
  generate->add_option("--parallelism", gen_parallelism, "Concurrent jobs (default: endpoint parallelism)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Convert an external dataset (JSONL) into records");
  std::string ingest_adapter, ingest_in, ingest_out;
  std::optional<std::size_t> ingest_limit;
  ingest->add_option("--adapter", ingest_adapter, "External adapter name")->required();
  ingest->add_option("--in", ingest_in, "Input JSONL")->required();
  ingest->add_option("--out", ingest_out, "Output JSONL of records")->required();
  ingest->add_option("--limit", ingest_limit, "Row limit (default: adapter limit)");

  // bench run
  auto* bench = app.add_subcommand("bench", "Benchmarks");
  bench->require_subcommand(1);
  auto* bench_run = bench->add_subcommand("run", "Judge a benchmark dataset and report its metric");
  std::string dataset_path, adapter_name, report_path, raw_dir;
  int repeats = 3;
  double max_failure_rate = 0.5;
  std::uint64_t bench_seed = 0;
  bench_run->add_option("--dataset", dataset_path, "Dataset JSONL")->required();
  bench_run->add_option("--adapter", adapter_name, "Dataset adapter")->required();
  bench_run->add_option("--endpoint", endpoint_path, "Judge endpoint config")->required();
  bench_run->add_option("--repeats", repeats, "Repeated runs")->check(CLI::PositiveNumber);
  bench_run->add_option("--out", report_path, "Report JSON path")->required();
  bench_run->add_option("--raw-dir", raw_dir, "Per-record dump directory (default: raw/ next to --out)");
  bench_run->add_option("--seed", bench_seed, "Candidate-order seed for pairwise sets");
  bench_run->add_option("--max-failure-rate", max_failure_rate, "Abort above this parse failure rate")
      ->check(CLI::Range(0.0, 1.0));

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus length statistics");
  std::string records_path, basis = "prompt";
  stats->add_option("--records", records_path, "JSONL of records or preference pairs")->required();
  stats->add_option("--basis", basis, "Word count basis")->check(CLI::IsMember({"prompt", "data"}));

  // loss audit
  auto* loss = app.add_subcommand("loss", "Alignment loss tools");
  loss->require_subcommand(1);
  auto* audit = loss->add_subcommand("audit", "Evaluate the loss on JSONL rows of log-probabilities");
  std::string loss_in;
  std::optional<int> normalize_tokens;
  bool with_gradients = false;
  audit->add_option("--in", loss_in, "JSONL of loss inputs")->required();
  audit->add_option("--normalize-tokens", normalize_tokens, "Divide the NLL term by this token count");
  audit->add_flag("--gradients", with_gradients, "Also emit analytic gradients");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the guardrail HTTP service");
  std::string listen = "127.0.0.1:8080";
  int timeout_ms = 120000;
  serve->add_option("--endpoint", endpoint_path, "Upstream judge endpoint config")->required();
  serve->add_option("--listen", listen, "host:port");
  serve->add_option("--repair-attempts", repair_attempts, "Corrective re-asks")
      ->check(CLI::Range(0, kMaxServiceRepairAttempts));
  serve->add_flag("--lenient", lenient, "Default for lenient highlight handling");
  serve->add_option("--timeout-ms", timeout_ms, "Per-request deadline")->check(CLI::PositiveNumber);

  std::vector<const char*> argv{"glider"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (evaluate->parsed()) {
      const auto record = record_from_json(json::parse(read_file(record_path)));
      auto client = detail::make_client(endpoint_path);
      JudgeOptions options;
      options.parse.lenient_highlights = lenient;
      auto outcome = judge(client, record, repair_attempts, options);
      if (!outcome) {
        json e = outcome.error().to_json();
        e["error"] = "JudgeError";
        return detail::fail(state, e);
      }
      json result = to_json(outcome.value().parsed);
      out << json{{"verdict", result}, {"repairs_used", outcome.value().repairs_used}}.dump() << '\n';
      return 0;
    }

    if (generate->parsed()) {
      const auto taxonomy = Taxonomy::load(taxonomy_path);
      auto client = detail::make_client(endpoint_path);
      PipelineConfig cfg;
      cfg.base_seed = seed;
      cfg.count = count;
      cfg.parallelism = gen_parallelism > 0 ? gen_parallelism : client.config().parallelism;
      cfg.output_dir = out_dir;
      if (!checkpoint_dir.empty()) cfg.checkpoint_dir = checkpoint_dir;
      err << "generating " << count << " jobs from seed " << seed << '\n';
      auto result = run_pipeline(taxonomy, cfg, client);
      json summary = result.report.to_json();
      summary["pipeline"] = result.stats.to_json();
      summary["train"] = (std::filesystem::path(out_dir) / "train.jsonl").string();
      out << summary.dump() << '\n';
      return 0;
    }

    if (ingest->parsed()) {
      const auto& adapters = external_adapters();
      auto it = adapters.find(ingest_adapter);
      if (it == adapters.end()) {
        return detail::fail(state, json{{"error", "AdapterError"}, {"detail", "unknown adapter " + ingest_adapter}});
      }
      const std::size_t limit = ingest_limit.value_or(it->second.limit);
      std::ofstream dest(ingest_out, std::ios::binary | std::ios::trunc);
      std::size_t written = 0, skipped = 0, line = 0;
      for (const auto& row : detail::read_jsonl(ingest_in)) {
        ++line;
        if (written >= limit) break;
        auto record = adapt_external(row, ingest_adapter);
        if (!record) {
          err << ingest_in << ": row " << line << ": " << record.error().detail << '\n';
          ++skipped;
          continue;
        }
        dest << to_json(record.value()).dump() << '\n';
        ++written;
      }
      out << json{{"adapter", ingest_adapter}, {"written", written}, {"skipped", skipped}}.dump() << '\n';
      return 0;
    }

    if (bench_run->parsed()) {
      auto adapter = parse_dataset_adapter(adapter_name);
      if (!adapter) {
        return detail::fail(state, SchemaError{0, "unknown adapter '" + adapter_name + "'"}.to_json());
      }
      auto spec = load_dataset(dataset_path, *adapter, bench_seed, repeats);
      if (!spec) return detail::fail(state, spec.error().to_json());
      auto client = detail::make_client(endpoint_path);
      BenchOptions options;
      options.max_parse_failure_rate = max_failure_rate;
      options.raw_dir = raw_dir.empty() ? std::filesystem::path(report_path).parent_path() / "raw"
                                        : std::filesystem::path(raw_dir);
      auto report = run_benchmark(spec.value(), client, options);
      if (!report) return detail::fail(state, report.error().to_json());
      const std::string text = report.value().to_json().dump(2);
      std::ofstream(report_path, std::ios::binary | std::ios::trunc) << text << '\n';
      out << report.value().to_json().dump() << '\n';
      return 0;
    }

    if (stats->parsed()) {
      std::vector<EvaluationRecord> records;
      for (const auto& row : detail::read_jsonl(records_path)) {
        records.push_back(row.contains("record") ? record_from_json(row["record"]) : record_from_json(row));
      }
      auto result = corpus_stats(records, basis == "data" ? WordBasis::DataOnly : WordBasis::FullPrompt);
      if (!result) return detail::fail(state, json{{"error", "DegenerateInput"}, {"detail", result.error().detail}});
      out << result.value().to_json().dump() << '\n';
      return 0;
    }

    if (audit->parsed()) {
      LossOptions options{normalize_tokens};
      std::size_t line = 0;
      std::ostringstream buffer;
      for (const auto& row : detail::read_jsonl(loss_in)) {
        ++line;
        try {
          const auto inputs = loss_inputs_from_json(row);
          json result = to_json(apo_zero_nll(inputs, options));
          if (with_gradients) result["gradients"] = to_json(loss_gradients(inputs, options));
          buffer << result.dump() << '\n';
        } catch (const ValidationError& e) {
          json error = validation_error_json(e);
          error["row"] = line;
          return detail::fail(state, error);
        }
      }
      out << buffer.str();
      return 0;
    }

    if (serve->parsed()) {
      ServiceConfig cfg;
      cfg.endpoint = load_endpoint_config(endpoint_path);
      auto colon = listen.rfind(':');
      if (colon == std::string::npos) {
        err << "error: --listen expects host:port\n";
        return 2;
      }
      cfg.host = listen.substr(0, colon);
      auto port = detail::parse_int(listen.substr(colon + 1));
      if (!port) {
        err << "error: --listen expects host:port\n";
        return 2;
      }
      cfg.port = *port;
      cfg.repair_attempts = repair_attempts;
      cfg.lenient_highlights = lenient;
      cfg.request_timeout = std::chrono::milliseconds(timeout_ms);
      GuardrailService service(cfg, make_http_transport());
      httplib::Server server;
      err << "listening on " << cfg.host << ':' << cfg.port << '\n';
      if (!run_service(service, server)) {
        return detail::fail(state, json{{"error", "ListenError"}, {"detail", "cannot bind " + listen}});
      }
      return 0;
    }
  } catch (const ValidationError& e) {
    return detail::fail(state, validation_error_json(e));
  } catch (const ConfigError& e) {
    return detail::fail(state, json{{"error", "ConfigError"}, {"detail", e.what()}});
  } catch (const json::exception& e) {
    return detail::fail(state, json{{"error", "JsonError"}, {"detail", e.what()}});
  } catch (const std::exception& e) {
    return detail::fail(state, json{{"error", "Error"}, {"detail", e.what()}});
  }
  err << app.help();
  return 2;
}

}  // namespace glider
