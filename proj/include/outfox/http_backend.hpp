#pragma once

// Chat/completions HTTP client with bounded concurrency, a per-minute request
// budget, and exponential backoff on transient failures.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "outfox/backend.hpp"
#include "outfox/error.hpp"

namespace outfox {

struct HttpConfig {
  // Full endpoint URL, e.g. https://api.example.com/v1/chat/completions.
  // Paths ending in "chat/completions" get a chat payload, others a
  // plain completions payload.
  std::string url;
  std::string api_key;
  std::string model = "gpt-3.5-turbo";
  double timeout_seconds = 60.0;
  int max_retries = 5;
  std::chrono::milliseconds backoff_initial{500};
  std::chrono::milliseconds backoff_max{30000};
  int max_in_flight = 4;
  int requests_per_minute = 0;  // 0 = unlimited
  // Many APIs reject top_p == 0; smaller values are raised to this.
  double min_top_p = 1e-6;
};

// Reads OUTFOX_API_URL / OUTFOX_API_KEY. Credentials are never read from files.
inline HttpConfig http_config_from_env(HttpConfig base = {}) {
  const char* url = std::getenv("OUTFOX_API_URL");
  const char* key = std::getenv("OUTFOX_API_KEY");
  if (!url || !*url) throw CredentialError("OUTFOX_API_URL is not set");
  if (!key || !*key) throw CredentialError("OUTFOX_API_KEY is not set");
  base.url = url;
  base.api_key = key;
  return base;
}

namespace detail {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ArgumentError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline bool transient_status(int status) { return status == 429 || status >= 500; }

// Counting gate for in-flight requests plus a sliding one-minute window.
class RequestGate {
 public:
  RequestGate(int max_in_flight, int per_minute)
      : max_in_flight_(std::max(1, max_in_flight)), per_minute_(per_minute) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
    if (per_minute_ <= 0) return;
    while (true) {
      const auto now = std::chrono::steady_clock::now();
      while (!window_.empty() && now - window_.front() >= std::chrono::minutes(1))
        window_.pop_front();
      if (static_cast<int>(window_.size()) < per_minute_) {
        window_.push_back(now);
        return;
      }
      cv_.wait_until(lock, window_.front() + std::chrono::minutes(1));
    }
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int max_in_flight_;
  int per_minute_;
  int in_flight_ = 0;
  std::deque<std::chrono::steady_clock::time_point> window_;
};

}  // namespace detail

class HttpBackend final : public CompletionBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpBackend(HttpConfig cfg, Sleeper sleeper = {})
      : cfg_(std::move(cfg)),
        url_(detail::parse_url(cfg_.url)),
        gate_(cfg_.max_in_flight, cfg_.requests_per_minute),
        sleep_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })) {
    if (cfg_.api_key.empty()) throw CredentialError("no API key configured");
  }

  std::string complete(std::string_view prompt, const GenerationParams& params) override {
    gate_.acquire();
    struct Release {
      detail::RequestGate& g;
      ~Release() { g.release(); }
    } release{gate_};

    const std::string body = request_body(prompt, params).dump();
    const std::string id = request_key(prompt, params);
    auto delay = cfg_.backoff_initial;
    for (int attempt = 1;; ++attempt) {
      ++attempts_;
      httplib::Client client(url_.origin);
      const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
      client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      httplib::Headers headers{{"Authorization", "Bearer " + cfg_.api_key}};
      auto res = client.Post(url_.path, headers, body, "application/json");

      std::string failure;
      if (!res) {
        failure = "transport error: " + httplib::to_string(res.error());
      } else if (res->status == 401 || res->status == 403) {
        throw CredentialError("endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
      } else if (res->status >= 200 && res->status < 300) {
        spdlog::debug("http request {} attempt {} ok", id, attempt);
        return extract_text(res->body);
      } else if (detail::transient_status(res->status)) {
        failure = "HTTP " + std::to_string(res->status);
      } else {
        throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
      }

      spdlog::warn("http request {} attempt {} failed: {}", id, attempt, failure);
      if (attempt > cfg_.max_retries)
        throw BackendUnavailableError("retries exhausted after " + std::to_string(attempt) +
                                      " attempts: " + failure);
      sleep_(delay);
      delay = std::min(delay * 2, cfg_.backoff_max);
    }
  }

  std::string name() const override { return "http"; }

  // Total HTTP attempts made, including retries.
  std::size_t attempts() const noexcept { return attempts_.load(); }
  // True once any request had its top_p raised to min_top_p.
  bool top_p_clamped() const noexcept { return top_p_clamped_.load(); }

  nlohmann::json request_body(std::string_view prompt, const GenerationParams& params) {
    nlohmann::json j;
    j["model"] = cfg_.model;
    if (url_.path.ends_with("chat/completions"))
      j["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", std::string(prompt)}}});
    else
      j["prompt"] = std::string(prompt);
    j["temperature"] = params.temperature;
    double top_p = params.top_p;
    if (top_p < cfg_.min_top_p) {
      top_p = cfg_.min_top_p;
      top_p_clamped_ = true;
    }
    j["top_p"] = top_p;
    j["max_tokens"] = params.max_tokens;
    if (params.seed) j["seed"] = *params.seed;
    return j;
  }

 private:
  static std::string extract_text(const std::string& body) {
    try {
      auto j = nlohmann::json::parse(body);
      const auto& choice = j.at("choices").at(0);
      if (choice.contains("message")) return choice.at("message").at("content").get<std::string>();
      return choice.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("unexpected response body: ") + e.what());
    }
  }

  HttpConfig cfg_;
  detail::ParsedUrl url_;
  detail::RequestGate gate_;
  Sleeper sleep_;
  std::atomic<std::size_t> attempts_{0};
  std::atomic<bool> top_p_clamped_{false};
};

}  // namespace outfox
