#pragma once

// Guardrail HTTP service: POST /v1/evaluate judges one record through the
// upstream endpoint, GET /healthz answers without touching it.

#include <chrono>
#include <memory>
#include <string>

#include <httplib.h>

#include "glider/core.hpp"
#include "glider/http_transport.hpp"
#include "glider/json_io.hpp"
#include "glider/llm_client.hpp"
#include "glider/parsing.hpp"

namespace glider {

inline constexpr int kMaxServiceRepairAttempts = 5;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  EndpointConfig endpoint;
  int repair_attempts = kDefaultRepairAttempts;
  bool lenient_highlights = false;
  std::chrono::milliseconds request_timeout{120000};

  void validate() const {
    endpoint.validate();
    if (repair_attempts < 0 || repair_attempts > kMaxServiceRepairAttempts) {
      throw ValidationError("repair_attempts_max", "repair_attempts must be in [0, 5]");
    }
    if (request_timeout.count() <= 0) throw ValidationError("timeout_positive", "request timeout must be > 0");
    if (port < 0 || port > 65535) throw ValidationError("port_range", "port must be in [0, 65535]");
  }
};

struct ServiceResponse {
  int status;
  json body;
};

inline json validation_error_json(const ValidationError& e) {
  return json{{"error", "ValidationError"}, {"invariant", e.invariant()}, {"detail", e.what()}};
}

class GuardrailService {
 public:
  GuardrailService(ServiceConfig config, std::shared_ptr<Transport> transport)
      : config_((config.validate(), std::move(config))), client_(config_.endpoint, std::move(transport)) {}

  const ServiceConfig& config() const noexcept { return config_; }
  ChatClient& client() noexcept { return client_; }

  ServiceResponse handle_health() const { return {200, json{{"status", "ok"}}}; }

  /// Body: `{"record": {...}, "options": {"lenient_highlights": bool, "repair_attempts": int}}`.
  ServiceResponse handle_evaluate(const std::string& body) {
    const auto start = ChatClient::Clock::now();
    auto request = json::parse(body, nullptr, false);
    if (request.is_discarded() || !request.is_object()) {
      return {400, json{{"error", "BadRequest"}, {"detail", "body is not a JSON object"}}};
    }
    JudgeOptions options;
    options.parse.lenient_highlights = config_.lenient_highlights;
    int repairs = config_.repair_attempts;
    std::optional<EvaluationRecord> record;
    try {
      record = record_from_json(detail::require(request, "record"));
      if (request.contains("options")) {
        const auto& o = request["options"];
        if (!o.is_object()) throw ValidationError("schema", "options must be an object");
        if (o.contains("lenient_highlights")) {
          if (!o["lenient_highlights"].is_boolean()) throw ValidationError("schema", "lenient_highlights must be a boolean");
          options.parse.lenient_highlights = o["lenient_highlights"].get<bool>();
        }
        if (o.contains("repair_attempts")) {
          if (!o["repair_attempts"].is_number_integer()) throw ValidationError("schema", "repair_attempts must be an integer");
          repairs = o["repair_attempts"].get<int>();
          if (repairs < 0 || repairs > kMaxServiceRepairAttempts) {
            throw ValidationError("repair_attempts_max", "repair_attempts must be in [0, 5]");
          }
        }
      }
    } catch (const ValidationError& e) {
      return {422, validation_error_json(e)};
    } catch (const json::exception& e) {
      return {422, json{{"error", "ValidationError"}, {"invariant", "schema"}, {"detail", e.what()}}};
    }

    options.deadline = start + config_.request_timeout;
    auto outcome = judge(client_, *record, repairs, options);
    if (!outcome) {
      json err = outcome.error().to_json();
      err["error"] = "JudgeError";
      return {outcome.error().is_timeout() ? 504 : 502, err};
    }
    const auto& parsed = outcome.value().parsed;
    try {
      // Never hand out a verdict that does not hold against the record.
      parsed.verdict.check_against(*record);
    } catch (const ValidationError& e) {
      return {502, json{{"error", "JudgeError"}, {"detail", e.what()}}};
    }
    const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(ChatClient::Clock::now() - start);
    return {200, json{{"verdict", to_json(parsed)},
                      {"latency_ms", latency.count()},
                      {"repairs_used", outcome.value().repairs_used}}};
  }

  void mount(httplib::Server& server) {
    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      auto r = handle_health();
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    });
    server.Post("/v1/evaluate", [this](const httplib::Request& req, httplib::Response& res) {
      auto r = handle_evaluate(req.body);
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    });
  }

 private:
  ServiceConfig config_;
  ChatClient client_;
};

/// Blocks serving until `server.stop()` is called elsewhere.
inline bool run_service(GuardrailService& service, httplib::Server& server) {
  service.mount(server);
  return server.listen(service.config().host, service.config().port);
}

}  // namespace glider
