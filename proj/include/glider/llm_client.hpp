#pragma once

// Chat-completions client. Requests use the de-facto `messages` schema and
// are POSTed to `{base_url}/chat/completions`; the reply text is read from
// `choices[0].message.content`. The wire itself sits behind `Transport` so
// tests can substitute an in-process mock (see http_transport.hpp for the
// real one).

#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <variant>

#include "glider/concurrency.hpp"
#include "glider/core.hpp"
#include "glider/json_io.hpp"
#include "glider/parsing.hpp"
#include "glider/prompting.hpp"
#include "glider/random.hpp"

namespace glider {

struct EndpointConfig {
  std::string base_url;
  std::string model_name;
  std::string api_key_env;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 2;
  int parallelism = 4;
  /// Delay before the first retry; doubles on each further retry.
  std::chrono::milliseconds retry_backoff{250};

  void validate() const {
    if (base_url.empty()) throw ValidationError("base_url_set", "endpoint base_url is empty");
    if (parallelism < 1) throw ValidationError("parallelism_positive", "parallelism must be >= 1");
    if (timeout.count() <= 0) throw ValidationError("timeout_positive", "timeout must be > 0");
    if (max_retries < 0 || max_retries > 10) throw ValidationError("max_retries_range", "max_retries must be in [0, 10]");
  }
};

class ChatRequest {
 public:
  ChatRequest(std::optional<std::string> system, std::string user, SamplingConfig sampling)
      : system_(std::move(system)), user_(std::move(user)), sampling_(std::move(sampling)) {
    if (user_.empty()) throw ValidationError("user_non_empty", "chat request has an empty user message");
  }

  const std::optional<std::string>& system() const noexcept { return system_; }
  const std::string& user() const noexcept { return user_; }
  const SamplingConfig& sampling() const noexcept { return sampling_; }

 private:
  std::optional<std::string> system_;
  std::string user_;
  SamplingConfig sampling_;
};

enum class TransportErrorKind { Timeout, Http, Decode, Connection };

inline std::string_view to_string(TransportErrorKind k) {
  switch (k) {
    case TransportErrorKind::Timeout: return "Timeout";
    case TransportErrorKind::Http: return "Http";
    case TransportErrorKind::Decode: return "Decode";
    case TransportErrorKind::Connection: return "Connection";
  }
  return "";
}

struct TransportError {
  TransportErrorKind kind;
  int status = 0;
  std::string detail;

  bool retryable() const {
    switch (kind) {
      case TransportErrorKind::Timeout:
      case TransportErrorKind::Connection: return true;
      case TransportErrorKind::Http: return status >= 500 || status == 429;
      case TransportErrorKind::Decode: return false;
    }
    return false;
  }

  json to_json() const {
    json j{{"kind", std::string(to_string(kind))}, {"detail", detail}};
    if (kind == TransportErrorKind::Http) j["status"] = status;
    return j;
  }
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::multimap<std::string, std::string>;

class Transport {
 public:
  virtual ~Transport() = default;
  /// One POST; connection failures and timeouts come back as errors, any
  /// HTTP status as a response.
  virtual Result<HttpResponse, TransportError> post(const std::string& url, const HttpHeaders& headers,
                                                    const std::string& body, std::chrono::milliseconds timeout) = 0;
};

/// Adapts a callable to Transport; used for mocks.
class FunctionTransport : public Transport {
 public:
  using Handler = std::function<Result<HttpResponse, TransportError>(const std::string& url, const HttpHeaders&,
                                                                      const std::string& body)>;
  explicit FunctionTransport(Handler handler) : handler_(std::move(handler)) {}

  Result<HttpResponse, TransportError> post(const std::string& url, const HttpHeaders& headers,
                                            const std::string& body, std::chrono::milliseconds) override {
    return handler_(url, headers, body);
  }

 private:
  Handler handler_;
};

/// Shareable client. Every attempt holds an admission permit, so at most
/// `parallelism` requests are in flight across all callers (copies share
/// the limiter).
class ChatClient {
 public:
  using Clock = std::chrono::steady_clock;
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  ChatClient(EndpointConfig config, std::shared_ptr<Transport> transport)
      : config_(std::move(config)), transport_(std::move(transport)),
        limiter_(std::make_shared<AdmissionLimiter>(config_.parallelism)) {
    config_.validate();
    if (!transport_) throw std::invalid_argument("ChatClient needs a transport");
  }

  const EndpointConfig& config() const noexcept { return config_; }
  int in_flight() const { return limiter_->in_flight(); }

  /// Replaces the backoff sleep (tests use a no-op).
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

  std::string endpoint_url() const {
    std::string base = config_.base_url;
    while (!base.empty() && base.back() == '/') base.pop_back();
    return base + "/chat/completions";
  }

  /// Serialized request body; byte-stable for a fixed request and config.
  std::string request_body(const ChatRequest& req) const {
    json messages = json::array();
    if (req.system()) messages.push_back({{"role", "system"}, {"content", *req.system()}});
    messages.push_back({{"role", "user"}, {"content", req.user()}});
    json body = to_json(req.sampling());
    body["model"] = config_.model_name;
    body["messages"] = std::move(messages);
    body["stream"] = false;
    return body.dump();
  }

  Result<std::string, TransportError> complete(const ChatRequest& req,
                                               std::optional<Clock::time_point> deadline = std::nullopt) {
    const std::string body = request_body(req);
    HttpHeaders headers{{"Content-Type", "application/json"}};
    if (!config_.api_key_env.empty()) {
      if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }
    TransportError last{TransportErrorKind::Connection, 0, "no attempt made"};
    auto backoff = config_.retry_backoff;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        sleeper_(backoff);
        backoff *= 2;
      }
      auto timeout = config_.timeout;
      if (deadline) {
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now());
        if (remaining.count() <= 0) return TransportError{TransportErrorKind::Timeout, 0, "request deadline exceeded"};
        timeout = std::min(timeout, remaining);
      }
      Result<HttpResponse, TransportError> response = TransportError{TransportErrorKind::Connection, 0, ""};
      {
        AdmissionLimiter::Permit permit(*limiter_);
        response = transport_->post(endpoint_url(), headers, body, timeout);
      }
      if (!response) {
        last = response.error();
        if (!last.retryable()) return last;
        continue;
      }
      const auto& r = response.value();
      if (r.status < 200 || r.status >= 300) {
        last = TransportError{TransportErrorKind::Http, r.status, r.body.substr(0, 512)};
        if (!last.retryable()) return last;
        continue;
      }
      return decode(r.body);
    }
    return last;
  }

  static Result<std::string, TransportError> decode(const std::string& body) {
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded()) return TransportError{TransportErrorKind::Decode, 0, "response is not JSON"};
    const json* content = nullptr;
    if (j.is_object() && j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
      const auto& first = j["choices"][0];
      if (first.is_object() && first.contains("message") && first["message"].is_object() &&
          first["message"].contains("content")) {
        content = &first["message"]["content"];
      }
    }
    if (content == nullptr || !content->is_string()) {
      return TransportError{TransportErrorKind::Decode, 0, "missing choices[0].message.content"};
    }
    return content->get<std::string>();
  }

 private:
  EndpointConfig config_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<AdmissionLimiter> limiter_;
  Sleeper sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
};

inline Result<std::string, TransportError> complete(ChatClient& client, const ChatRequest& req) {
  return client.complete(req);
}

/// Sampling for data generation: temperature ~ U[0.8, 1.0], top_p ~ U[0.9, 1.0],
/// a pure function of the seed.
inline SamplingConfig jittered_generation_sampling(std::uint64_t rng_seed, int max_tokens = 8192) {
  Rng rng(rng_seed);
  double temperature = rng.uniform(0.8, 1.0);
  double top_p = rng.uniform(0.9, 1.0);
  return SamplingConfig(temperature, top_p, max_tokens, static_cast<std::int64_t>(rng_seed & 0x7fffffffffffffffULL));
}

struct JudgeOptions {
  ParseOptions parse;
  int max_tokens = 2048;
  std::optional<ChatClient::Clock::time_point> deadline;
};

struct JudgeOutcome {
  ParsedVerdict parsed;
  int repairs_used = 0;
  int calls = 0;
};

struct JudgeError {
  std::variant<ParseFailure, TransportError> cause;
  int calls = 0;

  bool is_timeout() const {
    auto* t = std::get_if<TransportError>(&cause);
    return t && t->kind == TransportErrorKind::Timeout;
  }

  json to_json() const {
    json j{{"calls", calls}};
    if (auto* p = std::get_if<ParseFailure>(&cause)) {
      j["parse_failure"] = p->to_json();
    } else {
      j["transport_error"] = std::get<TransportError>(cause).to_json();
    }
    return j;
  }
};

inline constexpr int kDefaultRepairAttempts = 2;

inline std::string repair_instruction(const ParseFailure& failure) {
  return "\n\nYour previous output could not be accepted (" + std::string(to_string(failure.kind)) + ": " +
         failure.detail +
         "). Answer again in exactly the required format: a <reasoning> block of bullet points, a <highlight> "
         "block holding a bracketed list of quoted phrases copied from the data, and a <score> block holding "
         "one integer from the rubric.";
}

/// build_judge_prompt -> complete -> parse_verdict, re-asking with a
/// corrective instruction up to `repair_attempts` times.
inline Result<JudgeOutcome, JudgeError> judge(ChatClient& client, const EvaluationRecord& record,
                                              int repair_attempts = kDefaultRepairAttempts,
                                              const JudgeOptions& options = {},
                                              const TemplateSet& templates = TemplateSet::defaults()) {
  const std::string prompt = build_judge_prompt(record, templates);
  std::string user = prompt;
  int calls = 0;
  for (int attempt = 0; attempt <= repair_attempts; ++attempt) {
    ChatRequest req(std::nullopt, user, SamplingConfig::judge(options.max_tokens));
    ++calls;
    auto text = client.complete(req, options.deadline);
    if (!text) return JudgeError{text.error(), calls};
    auto parsed = parse_verdict_ex(text.value(), record, options.parse);
    if (parsed) return JudgeOutcome{std::move(parsed).value(), attempt, calls};
    if (attempt == repair_attempts) return JudgeError{parsed.error(), calls};
    user = prompt + repair_instruction(parsed.error());
  }
  return JudgeError{TransportError{TransportErrorKind::Connection, 0, "unreachable"}, calls};
}

/// Builds a chat-completions response body carrying `content`; handy for
/// mocks and tests.
inline std::string chat_response_body(const std::string& content) {
  json j{{"choices", json::array({{{"index", 0},
                                   {"message", {{"role", "assistant"}, {"content", content}}},
                                   {"finish_reason", "stop"}}})}};
  return j.dump();
}

}  // namespace glider
