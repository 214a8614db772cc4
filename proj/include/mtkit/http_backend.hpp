#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mtkit/backend.hpp"

namespace mtkit::backend {

// --- Wire schemas (JSON over HTTP) ---------------------------------------
//
// POST /v1/generate  {"prompt","decode":{"mode":"greedy"|"sample",...},
//                     "num_samples","max_tokens","request_id"}
//                    -> {"samples":[str|{"error":str}]}
// POST /v1/score     {"source","hypothesis","reference":str|null,"scorer_id"}
//                    -> {"score": float}
// POST /v1/judge     same request -> {"spans":[{"start","end","severity","category"}]}

inline nlohmann::json to_wire(const GenRequest& req) {
  nlohmann::json decode;
  if (auto* s = std::get_if<SampleDecode>(&req.decode)) {
    decode = {{"mode", "sample"}, {"temperature", s->temperature}};
  } else {
    decode = {{"mode", "greedy"}};
  }
  return {{"prompt", req.prompt},
          {"decode", decode},
          {"num_samples", req.num_samples},
          {"max_tokens", req.max_tokens},
          {"request_id", req.request_id}};
}

inline GenRequest gen_request_from_wire(const nlohmann::json& j) {
  GenRequest req;
  req.prompt = j.at("prompt").get<std::string>();
  const auto& d = j.at("decode");
  if (d.at("mode") == "greedy") {
    req.decode = GreedyDecode{};
  } else if (d.at("mode") == "sample") {
    req.decode = SampleDecode{d.at("temperature").get<double>()};
  } else {
    throw std::invalid_argument("unknown decode mode");
  }
  req.num_samples = j.at("num_samples").get<size_t>();
  req.max_tokens = j.at("max_tokens").get<size_t>();
  req.request_id = j.value("request_id", "");
  return req;
}

inline nlohmann::json to_wire(const ScoreRequest& req) {
  return {{"source", req.source},
          {"hypothesis", req.hypothesis},
          {"reference", req.reference ? nlohmann::json(*req.reference)
                                      : nlohmann::json(nullptr)},
          {"scorer_id", req.scorer_id}};
}

inline ScoreRequest score_request_from_wire(const nlohmann::json& j) {
  ScoreRequest req;
  req.source = j.at("source").get<std::string>();
  req.hypothesis = j.at("hypothesis").get<std::string>();
  if (!j.at("reference").is_null())
    req.reference = j.at("reference").get<std::string>();
  req.scorer_id = j.at("scorer_id").get<std::string>();
  return req;
}

inline nlohmann::json samples_to_wire(const std::vector<SampleResult>& samples) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : samples) {
    if (s.ok())
      arr.push_back(*s.text);
    else
      arr.push_back(nlohmann::json{{"error", s.error}});
  }
  return {{"samples", arr}};
}

inline std::vector<SampleResult> samples_from_wire(const nlohmann::json& j) {
  std::vector<SampleResult> out;
  for (const auto& e : j.at("samples")) {
    if (e.is_string())
      out.push_back({e.get<std::string>(), {}});
    else
      out.push_back({std::nullopt, e.at("error").get<std::string>()});
  }
  return out;
}

inline nlohmann::json spans_to_wire(const SpanJudgement& j) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : j.spans)
    arr.push_back({{"start", s.start},
                   {"end", s.end},
                   {"severity", metrics::severity_name(s.severity)},
                   {"category", s.category}});
  return {{"spans", arr}};
}

inline SpanJudgement spans_from_wire(const nlohmann::json& j,
                                     const std::string& scorer_id) {
  SpanJudgement out;
  out.scorer_id = scorer_id;
  for (const auto& e : j.at("spans")) {
    metrics::SpanAnnotation s;
    s.start = e.at("start").get<size_t>();
    s.end = e.at("end").get<size_t>();
    s.severity = metrics::severity_from_name(e.at("severity").get<std::string>());
    s.category = e.value("category", "");
    s.source_judge = scorer_id;
    out.spans.push_back(std::move(s));
  }
  return out;
}

// --- Client --------------------------------------------------------------

struct HttpBackendConfig {
  std::string base_url = "http://127.0.0.1:8077";
  std::string api_key_header;  // empty = no auth header
  std::string api_key_value;
  size_t max_in_flight = 8;
  size_t max_attempts = 4;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::milliseconds timeout{30000};

  static HttpBackendConfig from_env() {
    HttpBackendConfig cfg;
    if (const char* v = std::getenv("MTKIT_BACKEND_URL")) cfg.base_url = v;
    if (const char* v = std::getenv("MTKIT_API_KEY_HEADER")) cfg.api_key_header = v;
    if (const char* v = std::getenv("MTKIT_API_KEY")) cfg.api_key_value = v;
    if (const char* v = std::getenv("MTKIT_MAX_IN_FLIGHT"))
      cfg.max_in_flight = std::stoul(v);
    if (const char* v = std::getenv("MTKIT_MAX_ATTEMPTS"))
      cfg.max_attempts = std::stoul(v);
    return cfg;
  }
};

namespace detail {

class Semaphore {
 public:
  explicit Semaphore(size_t count) : count_(count) {}
  void acquire() {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] { return count_ > 0; });
    --count_;
  }
  void release() {
    {
      std::lock_guard lk(m_);
      ++count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  size_t count_;
};

struct SemaphoreGuard {
  Semaphore& s;
  explicit SemaphoreGuard(Semaphore& sem) : s(sem) { s.acquire(); }
  ~SemaphoreGuard() { s.release(); }
};

}  // namespace detail

// JSON-over-HTTP client with bounded in-flight requests and exponential
// backoff retries. POSTs are idempotent per request_id; the server side
// is expected to dedupe if it retries matter there.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg)
      : cfg_(std::move(cfg)), sem_(cfg_.max_in_flight) {}

  // Requests go out unvalidated: the server owns validation, and its
  // rejections come back as HTTP 400 -> TransportError.
  std::vector<SampleResult> generate(const GenRequest& req) override {
    auto body = post("/v1/generate", to_wire(req), req.request_id);
    auto samples = samples_from_wire(body);
    if (samples.size() != req.num_samples)
      throw TransportError("generate: backend returned " +
                               std::to_string(samples.size()) + " slots for " +
                               std::to_string(req.num_samples) + " samples",
                           req.request_id);
    return samples;
  }

  double score(const ScoreRequest& req) override {
    auto body = post("/v1/score", to_wire(req), "");
    return body.at("score").get<double>();
  }

  SpanJudgement judge_spans(const ScoreRequest& req) override {
    auto body = post("/v1/judge", to_wire(req), "");
    SpanJudgement j;
    try {
      j = spans_from_wire(body, req.scorer_id);
    } catch (const std::exception& e) {
      throw TransportError(std::string("judge: unparseable payload: ") +
                           e.what() + "; raw: " + body.dump());
    }
    return validate_spans(std::move(j), req.hypothesis);
  }

  size_t peak_in_flight() const { return peak_in_flight_.load(); }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& payload,
                      const std::string& request_id) {
    detail::SemaphoreGuard guard(sem_);
    track_in_flight();
    auto backoff = cfg_.initial_backoff;
    std::string last_error;
    for (size_t attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      httplib::Client cli(cfg_.base_url);
      cli.set_read_timeout(cfg_.timeout);
      httplib::Headers headers;
      if (!cfg_.api_key_header.empty())
        headers.emplace(cfg_.api_key_header, cfg_.api_key_value);
      auto res = cli.Post(path, headers, payload.dump(), "application/json");
      if (!res) {
        last_error = "connection failure";
        continue;
      }
      if (res->status >= 500) {
        last_error = "server error " + std::to_string(res->status);
        continue;
      }
      untrack_in_flight();
      if (res->status != 200)
        throw TransportError("HTTP " + std::to_string(res->status) + " on " +
                                 path + ": " + res->body,
                             request_id);
      try {
        return nlohmann::json::parse(res->body);
      } catch (const std::exception& e) {
        throw TransportError(std::string("bad JSON from backend: ") + e.what() +
                                 "; raw: " + res->body,
                             request_id);
      }
    }
    untrack_in_flight();
    throw TransportError("retries exhausted on " + path + ": " + last_error,
                         request_id);
  }

  void track_in_flight() {
    size_t now = ++in_flight_;
    size_t peak = peak_in_flight_.load();
    while (now > peak && !peak_in_flight_.compare_exchange_weak(peak, now)) {
    }
  }
  void untrack_in_flight() { --in_flight_; }

  HttpBackendConfig cfg_;
  detail::Semaphore sem_;
  std::atomic<size_t> in_flight_{0};
  std::atomic<size_t> peak_in_flight_{0};
};

// --- Mock server ----------------------------------------------------------

// Serves the wire protocol on top of a Backend (normally MockBackend).
// Blocks until stop() is called from another thread.
class MockServer {
 public:
  explicit MockServer(Backend& impl) : impl_(impl) {
    server_.Post("/v1/generate", [this](const httplib::Request& req,
                                        httplib::Response& res) {
      handle(req, res, [&](const nlohmann::json& j) {
        return samples_to_wire(impl_.generate(gen_request_from_wire(j)));
      });
    });
    server_.Post("/v1/score", [this](const httplib::Request& req,
                                     httplib::Response& res) {
      handle(req, res, [&](const nlohmann::json& j) {
        return nlohmann::json{
            {"score", impl_.score(score_request_from_wire(j))}};
      });
    });
    server_.Post("/v1/judge", [this](const httplib::Request& req,
                                     httplib::Response& res) {
      handle(req, res, [&](const nlohmann::json& j) {
        return spans_to_wire(impl_.judge_spans(score_request_from_wire(j)));
      });
    });
  }

  bool listen(const std::string& host, int port) {
    return server_.listen(host, port);
  }
  int bind_any_port(const std::string& host) {
    return server_.bind_to_any_port(host);
  }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  void stop() { server_.stop(); }

 private:
  template <typename Fn>
  void handle(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    try {
      auto out = fn(nlohmann::json::parse(req.body));
      res.set_content(out.dump(), "application/json");
    } catch (const std::invalid_argument& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(),
                      "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(),
                      "application/json");
    }
  }

  Backend& impl_;
  httplib::Server server_;
};

}  // namespace mtkit::backend
