#pragma once

// Shared test helpers: reference implementations, random generators and
// mock upstreams.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <httplib.h>

#include "glider/glider.hpp"

namespace testsupport {

using glider::json;

// ---------------------------------------------------------------------------
// Reference implementations

inline double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  // Raw-moment form, long double accumulation.
  long double n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  long double num = n * sxy - sx * sy;
  long double den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  return static_cast<double>(num / den);
}

/// Harmonic mean of precision and recall, or nullopt when undefined.
inline std::optional<double> oracle_f1(const std::vector<int>& pred, const std::vector<int>& gold) {
  int tp = 0, pp = 0, ap = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pp += pred[i];
    ap += gold[i];
    tp += pred[i] & gold[i];
  }
  if (pp + ap == 0) return std::nullopt;
  if (tp == 0) return 0.0;
  double precision = static_cast<double>(tp) / pp;
  double recall = static_cast<double>(tp) / ap;
  return 2 * precision * recall / (precision + recall);
}

/// Enumerates every ordered pair of values within each unit into an explicit
/// coincidence matrix, then alpha = 1 - (n-1) * sum_{c!=k} o_ck / sum_{c!=k} n_c n_k.
inline std::optional<double> oracle_alpha(const std::vector<std::vector<std::optional<int>>>& units) {
  std::map<std::pair<int, int>, double> o;
  for (const auto& unit : units) {
    std::vector<int> values;
    for (const auto& v : unit)
      if (v) values.push_back(*v);
    if (values.size() < 2) continue;
    const double w = 1.0 / static_cast<double>(values.size() - 1);
    for (std::size_t a = 0; a < values.size(); ++a) {
      for (std::size_t b = 0; b < values.size(); ++b) {
        if (a != b) o[{values[a], values[b]}] += w;
      }
    }
  }
  std::map<int, double> marg;
  double n = 0;
  for (const auto& [ck, v] : o) {
    marg[ck.first] += v;
    n += v;
  }
  double off_o = 0;
  for (const auto& [ck, v] : o)
    if (ck.first != ck.second) off_o += v;
  double off_e = 0;
  for (const auto& [c, nc] : marg) {
    for (const auto& [k, nk] : marg) {
      if (c != k) off_e += nc * nk;
    }
  }
  if (off_e == 0) return std::nullopt;
  return 1.0 - (n - 1) * off_o / off_e;
}

// ---------------------------------------------------------------------------
// Fixtures

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("glider_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline std::string user_message(const json& request) { return request["messages"].back()["content"].get<std::string>(); }

inline const glider::Taxonomy& taxonomy() {
  static const glider::Taxonomy t = glider::Taxonomy::load(GLIDER_SOURCE_DIR "/data/taxonomy.json");
  return t;
}

inline glider::Rubric binary_rubric() {
  return glider::Rubric(glider::Scale::Binary, {{0, "The MODEL_OUTPUT is not faithful to the information provided in the CONTEXT"},
                                                {1, "The MODEL_OUTPUT is completely faithful to the information present in the CONTEXT"}});
}

inline glider::Rubric likert_rubric(glider::Scale scale) {
  std::map<int, std::string> d;
  for (int k : glider::scale_keys(scale)) d[k] = "Quality level " + std::to_string(k) + " of the response.";
  return glider::Rubric(scale, d);
}

inline glider::EvaluationRecord harry_potter_record() {
  return glider::EvaluationRecord({{"CONTEXT", "The Harry Potter series was written by George RR Martin"},
                                   {"USER INPUT", "Who wrote the Harry Potter series?"},
                                   {"MODEL_OUTPUT", "The Harry Potter series was written by JK Rowling"}},
                                  "Does the MODEL_OUTPUT faithfully follow the information in the CONTEXT?",
                                  binary_rubric());
}

inline glider::EvaluationRecord simple_record(int seed = 0, glider::Scale scale = glider::Scale::Likert5) {
  return glider::EvaluationRecord(
      {{"USER_INPUT", "Question number " + std::to_string(seed) + " about the water cycle."},
       {"MODEL_OUTPUT", "Answer number " + std::to_string(seed) + ": water evaporates, condenses and falls as rain."}},
      "Does the MODEL_OUTPUT answer the USER_INPUT correctly?", likert_rubric(scale));
}

// The Harry Potter transcript, exactly as emitted by the model.
inline constexpr const char* kHarryPotterOutput =
    "<reasoning>\n- The MODEL OUTPUT states that JK Rowling wrote the Harry Potter series, which contradicts the "
    "CONTEXT that incorrectly attributes it to George RR Martin. \n - The MODEL OUTPUT does not accurately reflect "
    "the information provided in the CONTEXT, thus failing to be faithful to it. \n - The correct author, JK Rowling, "
    "is not mentioned in the CONTEXT, leading to a discrepancy in the MODEL OUTPUT. \n</reasoning> \n <highlight> "
    "['JK Rowling', 'George RR Martin'] </highlight> \n<score> 0 </score>";

inline std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  auto pos = text.find(from);
  if (pos != std::string::npos) text.replace(pos, from.size(), to);
  return text;
}

inline std::string verdict_text(int score, const std::vector<std::string>& spans = {},
                                const std::vector<std::string>& bullets = {"The answer is reasonable."}) {
  return glider::render_verdict(glider::JudgeVerdict(bullets, spans, score));
}

// ---------------------------------------------------------------------------
// Random generators

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len, bool allow_newlines) {
  static const std::vector<std::string> atoms{
      "a", "b", "c", "x", "Z", "Q", "0", "7", " ", " ", " ", "'", "\"", "\\", ",", ".", "[", "]", "-", "*", "<", ">",
      "/", ":", "é", "ş", "İ", "中", "🙂", "\t"};
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, atoms.size() - 1);
  std::string out;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (allow_newlines && rng() % 17 == 0) {
      out += '\n';
    } else {
      out += atoms[pick(rng)];
    }
  }
  return out;
}

/// True if `s` could be mistaken for a verdict tag by the parser.
inline bool has_verdict_tag(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '<') continue;
    for (std::string_view name : {"reasoning", "highlight", "score"}) {
      if (glider::detail::match_tag_at(s, i, name, false) || glider::detail::match_tag_at(s, i, name, true)) return true;
    }
  }
  return false;
}

inline std::string random_line(std::mt19937_64& rng, std::size_t max_len) {
  while (true) {
    std::string s(glider::detail::trim(random_text(rng, max_len, false)));
    for (auto& c : s)
      if (c == '\t') c = ' ';
    s = std::string(glider::detail::trim(s));
    if (!s.empty() && !has_verdict_tag(s)) return s;
  }
}

inline std::string random_tag(std::mt19937_64& rng) {
  static const char* pool[] = {"CONTEXT", "USER INPUT", "MODEL_OUTPUT", "DOC 2", "ANSWER", "GOLD_ANSWER", "TEXT_1"};
  return pool[rng() % std::size(pool)];
}

struct RandomCase {
  glider::EvaluationRecord record;
  glider::JudgeVerdict verdict;
};

inline RandomCase random_case(std::mt19937_64& rng) {
  constexpr glider::Scale scales[] = {glider::Scale::Binary, glider::Scale::Likert3, glider::Scale::Likert5};
  const auto scale = scales[rng() % 3];
  std::vector<glider::DataField> fields;
  const std::size_t n_fields = 1 + rng() % 3;
  while (fields.size() < n_fields) {
    auto tag = random_tag(rng);
    bool dup = false;
    for (const auto& f : fields) dup |= f.tag == tag;
    if (dup) continue;
    std::string body;
    do {
      body = random_text(rng, 80, true);
    } while (has_verdict_tag(body));
    fields.push_back({tag, body});
  }
  glider::EvaluationRecord record(fields, random_line(rng, 40), likert_rubric(scale));

  std::vector<std::string> bullets;
  const std::size_t n_bullets = 1 + rng() % 4;
  for (std::size_t i = 0; i < n_bullets; ++i) bullets.push_back(random_line(rng, 60));

  std::vector<std::string> spans;
  const std::size_t n_spans = rng() % 4;
  for (std::size_t i = 0; i < n_spans; ++i) {
    const auto& body = fields[rng() % fields.size()].body;
    const std::size_t start = rng() % body.size();
    const std::size_t len = 1 + rng() % std::min<std::size_t>(12, body.size() - start);
    spans.push_back(body.substr(start, len));
  }
  auto keys = glider::scale_keys(scale);
  return {record, glider::JudgeVerdict(bullets, spans, keys[rng() % keys.size()])};
}

// ---------------------------------------------------------------------------
// Planted filter corpus

inline json clean_row(std::size_t i, bool code = false) {
  const std::string n = std::to_string(i);
  glider::Metadata meta{{"source", "synthetic"}};
  std::string answer = "Answer " + n + ": the river carries sediment to the delta.";
  if (code) {
    meta["content"] = "code";
    answer = "```python\n# step " + n + "\nprint('**delta**')\n```";
  }
  glider::EvaluationRecord record({{"USER_INPUT", "Question " + n + " about how rivers shape land."}, {"MODEL_OUTPUT", answer}},
                                  "Does the MODEL_OUTPUT answer question " + n + " accurately?",
                                  likert_rubric(glider::Scale::Likert5), meta);
  glider::PreferencePair pair(record, glider::JudgeVerdict({"It answers question " + n + "."}, {"Question " + n}, 5),
                              glider::JudgeVerdict({"It is off topic."}, {}, 1));
  return glider::to_json(pair);
}

struct PlantedCorpus {
  std::vector<json> rows;
  std::map<glider::FilterReason, std::size_t> planted;
  std::size_t clean = 0;
};

/// `n` rows of which a `fraction` carry exactly one planted violation,
/// cycling through every filter reason. One in ten clean rows is a code
/// sample with fenced markdown, which must survive.
inline PlantedCorpus planted_corpus(std::size_t n, double fraction, std::uint64_t seed) {
  using glider::FilterReason;
  std::mt19937_64 rng(seed);
  PlantedCorpus out;
  const auto n_bad = static_cast<std::size_t>(static_cast<double>(n) * fraction + 0.5);
  std::vector<bool> bad(n, false);
  for (std::size_t i = 0; i < n_bad; ++i) bad[i] = true;
  std::shuffle(bad.begin() + 1, bad.end(), rng);
  const FilterReason kinds[] = {FilterReason::Duplicate, FilterReason::NonIntegerScore, FilterReason::Markdown,
                                FilterReason::SpecialCharsInRubric, FilterReason::TruncationMarker,
                                FilterReason::TagRoundTripUnsafe};
  std::vector<std::size_t> clean_indices;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!bad[i] || clean_indices.empty()) {
      const bool code = rng() % 10 == 0;
      out.rows.push_back(clean_row(i, code));
      clean_indices.push_back(out.rows.size() - 1);
      ++out.clean;
      continue;
    }
    const FilterReason kind = kinds[k++ % std::size(kinds)];
    json row = clean_row(i);
    auto& fields = row["record"]["data_fields"];
    switch (kind) {
      case FilterReason::Duplicate: {
        row = out.rows[clean_indices[rng() % clean_indices.size()]];
        auto& body = row["record"]["data_fields"][0][1];
        body = "  " + body.get<std::string>() + "\n";
        row["record"]["pass_criteria"] = row["record"]["pass_criteria"].get<std::string>() + "  ";
        break;
      }
      case FilterReason::NonIntegerScore: row["chosen"]["score"] = 4.5; break;
      case FilterReason::Markdown: fields[1][1] = "## Answer\n" + fields[1][1].get<std::string>(); break;
      case FilterReason::SpecialCharsInRubric:
        row["record"]["rubric"]["descriptions"]["3"] = std::string("Partly correct\x01 answer.");
        break;
      case FilterReason::TruncationMarker:
        fields[1][1] = fields[1][1].get<std::string>() + " [4000 more words here...]";
        break;
      case FilterReason::TagRoundTripUnsafe:
        fields[1][1] = fields[1][1].get<std::string>() + "\n<MODEL_OUTPUT>\nmore";
        break;
      default: break;
    }
    out.rows.push_back(row);
    ++out.planted[kind];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmarks

/// `n` records tagged "Item <i>." with gold 1 + i % 5 (pointwise, Likert-5)
/// or i % 2 (pairwise, binary).
inline glider::BenchmarkSpec gold_spec(std::size_t n, glider::BenchmarkKind kind = glider::BenchmarkKind::Pointwise,
                                       int repeats = 3) {
  const bool pointwise = kind == glider::BenchmarkKind::Pointwise;
  std::vector<glider::BenchItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = std::to_string(i);
    glider::EvaluationRecord record(
        {{"USER_INPUT", "Item " + id + ". Explain how clouds form."},
         {"MODEL_OUTPUT", "Response " + id + ": warm air rises, cools and the vapour condenses."}},
        "Does the MODEL_OUTPUT explain cloud formation accurately?",
        pointwise ? likert_rubric(glider::Scale::Likert5) : likert_rubric(glider::Scale::Binary));
    items.push_back({record, pointwise ? 1 + static_cast<int>(i % 5) : static_cast<int>(i % 2)});
  }
  return glider::BenchmarkSpec("synthetic", kind, std::move(items), repeats);
}

/// Judge that answers with the gold score (or its binary complement when
/// `invert`), and with an unparseable reply for the first `garbage_per_ten`
/// of every ten items.
inline std::function<std::string(const json&)> gold_judge(const glider::BenchmarkSpec& spec, int garbage_per_ten = 0,
                                                          bool invert = false) {
  std::vector<int> gold;
  for (const auto& item : spec.items()) gold.push_back(item.gold);
  return [gold, garbage_per_ten, invert](const json& request) {
    const std::string user = user_message(request);
    const auto at = user.find("Item ");
    const std::size_t i = std::stoul(user.substr(at + 5));
    if (static_cast<int>(i % 10) < garbage_per_ten) return std::string("The response seems fine overall.");
    const int score = invert ? 1 - gold[i] : gold[i];
    return verdict_text(score, {"Item " + std::to_string(i)});
  };
}

// ---------------------------------------------------------------------------
// Mock upstreams

inline glider::EndpointConfig mock_endpoint(std::string base_url = "http://mock.invalid/v1", int parallelism = 4) {
  glider::EndpointConfig cfg;
  cfg.base_url = std::move(base_url);
  cfg.model_name = "mock-judge";
  cfg.parallelism = parallelism;
  cfg.max_retries = 0;
  cfg.retry_backoff = std::chrono::milliseconds(0);
  return cfg;
}

/// Client over an in-process transport; `reply` maps the decoded request to
/// the assistant's text. Every request body is appended to `log` if given.
inline glider::ChatClient function_client(std::function<std::string(const json&)> reply, int parallelism = 4,
                                          std::vector<json>* log = nullptr, std::mutex* log_mutex = nullptr) {
  auto transport = std::make_shared<glider::FunctionTransport>(
      [reply = std::move(reply), log, log_mutex](const std::string&, const glider::HttpHeaders&,
                                                 const std::string& body)
          -> glider::Result<glider::HttpResponse, glider::TransportError> {
        json request = json::parse(body);
        if (log) {
          std::lock_guard<std::mutex> lock(*log_mutex);
          log->push_back(request);
        }
        return glider::HttpResponse{200, glider::chat_response_body(reply(request))};
      });
  glider::ChatClient client(mock_endpoint("http://mock.invalid/v1", parallelism), transport);
  client.set_sleeper([](std::chrono::milliseconds) {});
  return client;
}

/// Extracts the text between `start` and the next `stop` in `text`.
inline std::string between(const std::string& text, const std::string& start, const std::string& stop) {
  auto a = text.find(start);
  if (a == std::string::npos) return {};
  a += start.size();
  auto b = text.find(stop, a);
  return text.substr(a, b == std::string::npos ? std::string::npos : b - a);
}

inline std::vector<std::string> split_list(const std::string& s, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (next == std::string::npos) break;
    pos = next + sep.size();
  }
  return out;
}

/// Canned generator covering every datagen stage. Output is a pure function
/// of the request, so pipeline runs are reproducible.
inline std::string canned_generator(const json& request) {
  const std::string user = user_message(request);
  const std::string seed = request.contains("seed") ? std::to_string(request["seed"].get<std::int64_t>()) : "0";
  auto metric_names = [&] {
    std::vector<std::string> names;
    for (const auto& line : split_list(between(user, "Metric to evaluate:\n", "\n\n"), "\n")) {
      if (line.rfind("- ", 0) == 0) names.push_back(line.substr(2, line.find(':') - 2));
    }
    return names;
  };
  auto data_block = [&](const std::vector<std::string>& tags) {
    std::string out;
    for (const auto& t : tags) {
      out += "<" + t + ">\nSample " + seed + " for " + t + " explains how the river moves sediment downstream.\n</" + t +
             ">\n";
    }
    return out;
  };
  auto criteria = [&] {
    std::string c = "Does the data satisfy";
    for (const auto& m : metric_names()) c += " " + m + ",";
    return c + " for seed " + seed + "?";
  };

  if (user.rfind("Create one data point", 0) == 0) {
    auto tags = split_list(between(user, "in this order: ", ". Forcing"), ", ");
    auto keys = split_list(between(user, "using only the scores ", ".\n"), ", ");
    std::string rubric;
    for (const auto& k : keys) rubric += k + ": Level " + k + " of quality for the metric.\n";
    return "<data>\n" + data_block(tags) + "</data>\n<pass_criteria>\n" + criteria() + "\n</pass_criteria>\n<rubric>\n" +
           rubric + "</rubric>\n<correct_reasoning>\n- The sample explains the process clearly.\n- It stays on topic.\n"
           "</correct_reasoning>\n<correct_score>\n" + keys.back() +
           "\n</correct_score>\n<incorrect_reasoning>\n- The sample is vague.\n</incorrect_reasoning>\n<incorrect_score>\n" +
           keys.front() + "\n</incorrect_score>";
  }
  if (user.rfind("Create one pairwise", 0) == 0) {
    auto tags = split_list(between(user, "in this order: ", ".\n"), ", ");
    return "<data>\n" + data_block(tags) + "</data>\n<better_response>\nA precise answer for sample " + seed +
           " that names the sediment load.\n</better_response>\n<worse_response>\nA vague answer for sample " + seed +
           ".\n</worse_response>\n<pass_criteria>\n" + criteria() +
           "\n</pass_criteria>\n<correct_reasoning>\n- BETTER_RESPONSE names the sediment load.\n</correct_reasoning>\n"
           "<incorrect_reasoning>\n- WORSE_RESPONSE is preferable because it is short.\n</incorrect_reasoning>";
  }
  if (user.rfind("You are an experienced data curator", 0) == 0) {
    return "chosen_score: VALID\nchosen_reasoning: VALID\nrejected_score: VALID\nrejected_reasoning: VALID";
  }
  if (user.rfind("A highlight span", 0) == 0) {
    return "<highlight>\n['moves sediment downstream', 'not in the data at all']\n</highlight>";
  }
  return "unexpected request";
}

/// httplib server speaking the chat-completions protocol on a free port.
class MockServer {
 public:
  struct Reply {
    int status = 200;
    std::string content;
    std::chrono::milliseconds delay{0};
  };
  using Handler = std::function<Reply(const json& request)>;

  explicit MockServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight_;
      int prev = max_in_flight_.load();
      while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
      }
      ++requests_;
      Reply r = handler_(json::parse(req.body));
      if (r.delay.count() > 0) std::this_thread::sleep_for(r.delay);
      --in_flight_;
      res.status = r.status;
      res.set_content(r.status == 200 ? glider::chat_response_body(r.content) : r.content, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int max_in_flight() const { return max_in_flight_.load(); }
  int requests() const { return requests_.load(); }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<int> requests_{0};
};

}  // namespace testsupport
