#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pgraph/errors.hpp"
#include "pgraph/hash.hpp"
#include "pgraph/prompt.hpp"

namespace pgraph {

struct GenRequest {
  AssembledPrompt prompt;
  double temperature = 0.4;
  int max_tokens = 512;
  std::string model_id;
};

struct GenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct GenResponse {
  std::string text;
  int latency_ms = 0;
  std::optional<GenUsage> usage;
  std::string backend;
  int attempts = 1;
  bool cached = false;
};

enum class GenErrorKind { kRateLimited, kServiceError, kTimeout, kTransport };

inline const char* to_string(GenErrorKind k) {
  switch (k) {
    case GenErrorKind::kRateLimited: return "rate_limited";
    case GenErrorKind::kServiceError: return "service_error";
    case GenErrorKind::kTimeout: return "timeout";
    case GenErrorKind::kTransport: return "transport";
  }
  return "?";
}

struct GenError {
  GenErrorKind kind = GenErrorKind::kTransport;
  int status = 0;
  std::string message;
  int attempts = 1;
};

// Per-request outcome; failures are recorded, never thrown across a batch.
struct GenResult {
  std::optional<GenResponse> response;
  std::optional<GenError> error;

  bool ok() const { return response.has_value(); }
};

// Raw text-generation backend. Implementations signal transient trouble by
// returning an error result; the gateway owns retries, caching and limits.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual const char* name() const = 0;
  virtual GenResult generate_once(const GenRequest& req) = 0;
};

// Deterministic mock: the completion is the prompt itself.
class EchoBackend final : public Backend {
 public:
  const char* name() const override { return "echo"; }
  GenResult generate_once(const GenRequest& req) override {
    GenResponse resp;
    resp.text = req.prompt.text;
    resp.backend = name();
    return {resp, std::nullopt};
  }
};

// Deterministic mock: the completion is the retrieved context texts joined
// in rank order and truncated to max_tokens whitespace words. With no
// context it produces the empty string.
class ExtractiveBackend final : public Backend {
 public:
  const char* name() const override { return "extractive"; }
  GenResult generate_once(const GenRequest& req) override {
    std::string joined;
    for (const auto& text : req.prompt.context_texts) {
      if (!joined.empty()) joined += ' ';
      joined += text;
    }
    GenResponse resp;
    resp.text = truncate_words(joined, req.max_tokens);
    resp.backend = name();
    return {resp, std::nullopt};
  }

  static std::string truncate_words(const std::string& s, int max_words) {
    if (max_words <= 0) return {};
    int words = 0;
    bool in_word = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      bool space = s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r';
      if (!space && !in_word) {
        ++words;
        if (words > max_words) {
          std::size_t end = i;
          while (end > 0 && (s[end - 1] == ' ' || s[end - 1] == '\t' ||
                             s[end - 1] == '\n' || s[end - 1] == '\r')) {
            --end;
          }
          return s.substr(0, end);
        }
      }
      in_word = !space;
    }
    return s;
  }
};

// JSON-over-HTTP chat-completion client (system + user messages, single
// choice). Base URL and key come from the environment by default:
// PGRAPH_API_BASE_URL, PGRAPH_API_KEY.
class HttpBackend final : public Backend {
 public:
  HttpBackend(std::string base_url, std::string api_key,
              int timeout_seconds = 60)
      : api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
    split_url(base_url, host_, path_prefix_);
  }

  static std::unique_ptr<HttpBackend> from_env() {
    const char* base = std::getenv("PGRAPH_API_BASE_URL");
    if (base == nullptr || *base == '\0') {
      throw InvalidConfigError("PGRAPH_API_BASE_URL is not set");
    }
    const char* key = std::getenv("PGRAPH_API_KEY");
    return std::make_unique<HttpBackend>(base, key ? key : "");
  }

  const char* name() const override { return "http"; }

  GenResult generate_once(const GenRequest& req) override {
    nlohmann::json body;
    body["model"] = req.model_id;
    body["messages"] = nlohmann::json::array(
        {{{"role", "system"},
          {"content", "You complete personalized text tasks. Follow the "
                      "instructions exactly."}},
         {{"role", "user"}, {"content", req.prompt.text}}});
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;

    httplib::Client cli(host_);
    cli.set_connection_timeout(timeout_seconds_, 0);
    cli.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key_);
    }
    auto res = cli.Post(path_prefix_ + "/chat/completions", headers,
                        body.dump(), "application/json");
    if (!res) {
      GenError err;
      err.kind = res.error() == httplib::Error::ConnectionTimeout ||
                         res.error() == httplib::Error::Read
                     ? GenErrorKind::kTimeout
                     : GenErrorKind::kTransport;
      err.message = httplib::to_string(res.error());
      return {std::nullopt, err};
    }
    if (res->status == 429) {
      return {std::nullopt,
              GenError{GenErrorKind::kRateLimited, 429, res->body, 1}};
    }
    if (res->status >= 400) {
      return {std::nullopt, GenError{GenErrorKind::kServiceError, res->status,
                                     res->body, 1}};
    }
    try {
      auto j = nlohmann::json::parse(res->body);
      GenResponse resp;
      resp.text = j.at("choices").at(0).at("message").at("content")
                      .get<std::string>();
      resp.backend = name();
      if (j.contains("usage")) {
        GenUsage usage;
        usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        usage.completion_tokens = j["usage"].value("completion_tokens", 0);
        resp.usage = usage;
      }
      return {resp, std::nullopt};
    } catch (const nlohmann::json::exception& e) {
      return {std::nullopt,
              GenError{GenErrorKind::kServiceError, res->status,
                       std::string("unparseable completion body: ") + e.what(),
                       1}};
    }
  }

  static void split_url(const std::string& url, std::string& host,
                        std::string& path) {
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto slash = url.find('/', host_start);
    if (slash == std::string::npos) {
      host = url;
      path.clear();
    } else {
      host = url.substr(0, slash);
      path = url.substr(slash);
      while (!path.empty() && path.back() == '/') path.pop_back();
    }
  }

 private:
  std::string host_;         // scheme://host[:port]
  std::string path_prefix_;  // e.g. /v1
  std::string api_key_;
  int timeout_seconds_;
};

struct RetryPolicy {
  int max_attempts = 3;
  int initial_backoff_ms = 200;
  double backoff_multiplier = 2.0;
};

// Sliding-window limiter; max_requests == 0 disables it.
class RateLimiter {
 public:
  RateLimiter(int max_requests, std::chrono::milliseconds window)
      : max_requests_(max_requests), window_(window) {}

  void acquire() {
    if (max_requests_ <= 0) return;
    std::unique_lock<std::mutex> lock(mu_);
    for (;;) {
      auto now = std::chrono::steady_clock::now();
      while (!issued_.empty() && now - issued_.front() >= window_) {
        issued_.pop_front();
      }
      if (int(issued_.size()) < max_requests_) {
        issued_.push_back(now);
        return;
      }
      auto wake = issued_.front() + window_;
      lock.unlock();
      std::this_thread::sleep_until(wake);
      lock.lock();
    }
  }

 private:
  int max_requests_;
  std::chrono::milliseconds window_;
  std::mutex mu_;
  std::deque<std::chrono::steady_clock::time_point> issued_;
};

// Disk cache of completions keyed by (model, prompt, temperature,
// max_tokens). Content-addressed JSON records; the stored key fields are
// compared on lookup so hash collisions degrade to misses, never wrong hits.
class ResponseCache {
 public:
  explicit ResponseCache(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  static std::string key_of(const GenRequest& req) {
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.9g", req.temperature);
    std::string canonical = req.model_id;
    canonical += '\x1f';
    canonical += req.prompt.text;
    canonical += '\x1f';
    canonical += temp;
    canonical += '\x1f';
    canonical += std::to_string(req.max_tokens);
    return canonical;
  }

  std::optional<GenResponse> get(const GenRequest& req) {
    std::lock_guard<std::mutex> lock(mu_);
    std::string key = key_of(req);
    for (int probe = 0;; ++probe) {
      auto path = path_for(key, probe);
      std::ifstream in(path);
      if (!in) return std::nullopt;
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception&) {
        return std::nullopt;
      }
      if (j.value("key", "") != key) continue;  // collision, probe next
      GenResponse resp;
      resp.text = j.at("text").get<std::string>();
      resp.backend = j.value("backend", "");
      if (j.contains("usage") && !j["usage"].is_null()) {
        GenUsage usage;
        usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        usage.completion_tokens = j["usage"].value("completion_tokens", 0);
        resp.usage = usage;
      }
      resp.cached = true;
      resp.attempts = 0;
      resp.latency_ms = 0;
      return resp;
    }
  }

  void put(const GenRequest& req, const GenResponse& resp) {
    std::lock_guard<std::mutex> lock(mu_);
    std::string key = key_of(req);
    for (int probe = 0;; ++probe) {
      auto path = path_for(key, probe);
      std::ifstream existing(path);
      if (existing) {
        nlohmann::json j;
        try {
          existing >> j;
          if (j.value("key", "") != key) continue;  // occupied by collision
        } catch (const nlohmann::json::exception&) {
        }
      }
      existing.close();
      nlohmann::ordered_json j;
      j["key"] = key;
      j["model_id"] = req.model_id;
      j["temperature"] = req.temperature;
      j["max_tokens"] = req.max_tokens;
      j["backend"] = resp.backend;
      j["text"] = resp.text;
      if (resp.usage) {
        j["usage"] = {{"prompt_tokens", resp.usage->prompt_tokens},
                      {"completion_tokens", resp.usage->completion_tokens}};
      } else {
        j["usage"] = nullptr;
      }
      std::ofstream out(path);
      out << j.dump(2) << '\n';
      return;
    }
  }

 private:
  std::filesystem::path path_for(const std::string& key, int probe) const {
    char name[40];
    std::snprintf(name, sizeof(name), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(key)));
    std::string file = name;
    if (probe > 0) file += "-" + std::to_string(probe);
    return std::filesystem::path(dir_) / (file + ".json");
  }

  std::string dir_;
  std::mutex mu_;
};

struct GatewayConfig {
  std::shared_ptr<Backend> backend;
  std::string cache_dir;  // empty disables the cache
  RetryPolicy retry;
  int rate_limit_requests = 0;  // 0 = unlimited
  int rate_limit_window_ms = 1000;
};

// Uniform generation front end: cache, rate limit, retries with exponential
// backoff. Shareable across threads.
class LlmGateway {
 public:
  explicit LlmGateway(GatewayConfig cfg)
      : cfg_(std::move(cfg)),
        limiter_(cfg_.rate_limit_requests,
                 std::chrono::milliseconds(cfg_.rate_limit_window_ms)) {
    if (!cfg_.backend) throw InvalidConfigError("gateway needs a backend");
    if (!cfg_.cache_dir.empty()) {
      cache_ = std::make_unique<ResponseCache>(cfg_.cache_dir);
    }
  }

  GenResult generate(const GenRequest& req) {
    if (req.max_tokens < 1) {
      return fail(GenErrorKind::kServiceError, 0, "max_tokens must be >= 1");
    }
    if (req.temperature < 0.0) {
      return fail(GenErrorKind::kServiceError, 0, "temperature must be >= 0");
    }
    if (cache_) {
      if (auto hit = cache_->get(req)) {
        return {*hit, std::nullopt};
      }
    }

    double backoff = double(cfg_.retry.initial_backoff_ms);
    GenResult last;
    for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
      limiter_.acquire();
      auto start = std::chrono::steady_clock::now();
      backend_calls_.fetch_add(1, std::memory_order_relaxed);
      last = cfg_.backend->generate_once(req);
      auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
      if (last.ok()) {
        last.response->attempts = attempt;
        last.response->latency_ms = int(elapsed);
        if (last.response->backend.empty()) {
          last.response->backend = cfg_.backend->name();
        }
        if (cache_) cache_->put(req, *last.response);
        return last;
      }
      last.error->attempts = attempt;
      if (!transient(last.error->kind, last.error->status) ||
          attempt == cfg_.retry.max_attempts) {
        return last;
      }
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long>(backoff)));
      backoff *= cfg_.retry.backoff_multiplier;
    }
    return last;
  }

  // Positionally aligned results; at most `parallelism` requests in flight.
  std::vector<GenResult> generate_batch(const std::vector<GenRequest>& reqs,
                                        int parallelism) {
    if (parallelism < 1) throw InvalidConfigError("parallelism must be >= 1");
    std::vector<GenResult> results(reqs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= reqs.size()) return;
        try {
          results[i] = generate(reqs[i]);
        } catch (const std::exception& e) {
          results[i] = {std::nullopt, GenError{GenErrorKind::kTransport, 0,
                                               e.what(), 1}};
        }
      }
    };
    std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(parallelism),
                              std::max<std::size_t>(reqs.size(), 1));
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    return results;
  }

  std::uint64_t backend_calls() const {
    return backend_calls_.load(std::memory_order_relaxed);
  }

 private:
  static bool transient(GenErrorKind kind, int status) {
    if (kind == GenErrorKind::kTimeout || kind == GenErrorKind::kTransport ||
        kind == GenErrorKind::kRateLimited) {
      return true;
    }
    return status >= 500;
  }

  static GenResult fail(GenErrorKind kind, int status, std::string msg) {
    return {std::nullopt, GenError{kind, status, std::move(msg), 1}};
  }

  GatewayConfig cfg_;
  RateLimiter limiter_;
  std::unique_ptr<ResponseCache> cache_;
  std::atomic<std::uint64_t> backend_calls_{0};
};

inline std::shared_ptr<Backend> make_backend(const std::string& name) {
  if (name == "echo") return std::make_shared<EchoBackend>();
  if (name == "extractive") return std::make_shared<ExtractiveBackend>();
  if (name == "http") return std::shared_ptr<Backend>(HttpBackend::from_env());
  throw InvalidConfigError("unknown backend: " + name);
}

}  // namespace pgraph
