#pragma once

// Text-generation and token-scoring capabilities, plus the scripted mock
// and record/replay wrappers. The HTTP client lives in http_backend.hpp so
// that only callers who need it pull in the HTTP stack.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "outfox/error.hpp"
#include "outfox/hashing.hpp"

namespace outfox {

struct GenerationParams {
  double temperature = 0.0;
  double top_p = 1.0;
  std::int64_t max_tokens = 1024;
  std::optional<std::int64_t> seed;

  bool operator==(const GenerationParams&) const = default;
};

// Greedy decoding for classification calls.
inline GenerationParams detection_params() { return {0.0, 0.0, 16, std::nullopt}; }

// Sampling settings for essay generation and attacks.
inline GenerationParams generation_params() { return {1.3, 1.0, 1024, std::nullopt}; }

inline nlohmann::ordered_json to_json(const GenerationParams& p) {
  nlohmann::ordered_json j;
  j["temperature"] = p.temperature;
  j["top_p"] = p.top_p;
  j["max_tokens"] = p.max_tokens;
  j["seed"] = p.seed ? nlohmann::ordered_json(*p.seed) : nlohmann::ordered_json(nullptr);
  return j;
}

inline GenerationParams params_from_json(const nlohmann::json& j) {
  GenerationParams p;
  p.temperature = j.value("temperature", p.temperature);
  p.top_p = j.value("top_p", p.top_p);
  p.max_tokens = j.value("max_tokens", p.max_tokens);
  if (j.contains("seed") && !j["seed"].is_null()) p.seed = j["seed"].get<std::int64_t>();
  return p;
}

// Stable identifier of a (prompt, params) request.
inline std::string request_key(std::string_view prompt, const GenerationParams& params) {
  std::string material(prompt);
  material += '\x1f';
  material += to_json(params).dump();
  return sha256_hex(material).substr(0, 16);
}

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  // Implementations must be safe to call from several threads.
  virtual std::string complete(std::string_view prompt, const GenerationParams& params) = 0;
  virtual std::string name() const = 0;
};

struct TokenScore {
  std::string token;
  double log_prob = 0.0;  // <= 0
  std::int64_t rank = 1;  // 1-based
  double entropy = 0.0;   // nats, >= 0
};

class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;
  virtual std::vector<TokenScore> score_tokens(std::string_view text) const = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock

enum class MatchKind { Suffix, Contains, Exact };

inline MatchKind match_kind_from_string(std::string_view s) {
  if (s == "suffix") return MatchKind::Suffix;
  if (s == "contains") return MatchKind::Contains;
  if (s == "exact") return MatchKind::Exact;
  throw ArgumentError("unknown match kind '" + std::string(s) + "'");
}

inline std::string_view to_string(MatchKind k) {
  switch (k) {
    case MatchKind::Suffix: return "suffix";
    case MatchKind::Contains: return "contains";
    case MatchKind::Exact: return "exact";
  }
  return "exact";
}

struct ScriptRule {
  MatchKind kind = MatchKind::Exact;
  std::string pattern;
  std::string response;

  bool matches(std::string_view prompt) const {
    switch (kind) {
      case MatchKind::Suffix: return prompt.ends_with(pattern);
      case MatchKind::Contains: return prompt.find(pattern) != std::string_view::npos;
      case MatchKind::Exact: return prompt == pattern;
    }
    return false;
  }
};

inline nlohmann::ordered_json to_json(const ScriptRule& r) {
  nlohmann::ordered_json j;
  j["match"]["kind"] = to_string(r.kind);
  j["match"]["pattern"] = r.pattern;
  j["response"] = r.response;
  return j;
}

inline std::vector<ScriptRule> read_script(std::istream& in) {
  std::vector<ScriptRule> rules;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ScriptRule r;
      r.kind = match_kind_from_string(j.at("match").at("kind").get<std::string>());
      r.pattern = j.at("match").at("pattern").get<std::string>();
      r.response = j.at("response").get<std::string>();
      rules.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("bad script rule: ") + e.what());
    } catch (const ArgumentError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return rules;
}

inline std::vector<ScriptRule> load_script(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open script " + path);
  return read_script(in);
}

// Answers from a rule table: first matching rule in declaration order, else
// the default response, else ScriptMissError. Ignores params entirely.
class MockBackend final : public CompletionBackend {
 public:
  explicit MockBackend(std::vector<ScriptRule> rules,
                       std::optional<std::string> default_response = std::nullopt)
      : rules_(std::move(rules)), default_(std::move(default_response)) {}

  std::string complete(std::string_view prompt, const GenerationParams&) override {
    for (const auto& r : rules_)
      if (r.matches(prompt)) return r.response;
    if (default_) return *default_;
    throw ScriptMissError("mock script has no rule for prompt ending '" +
                          std::string(prompt.substr(prompt.size() > 60 ? prompt.size() - 60 : 0)) +
                          "'");
  }

  std::string name() const override { return "mock"; }

 private:
  std::vector<ScriptRule> rules_;
  std::optional<std::string> default_;
};

// ---------------------------------------------------------------------------
// Transcript capture and replay

struct TranscriptEntry {
  std::string request_id;
  std::string prompt_sha256;
  GenerationParams params;
  std::string response;
};

inline nlohmann::ordered_json to_json(const TranscriptEntry& e) {
  nlohmann::ordered_json j;
  j["request_id"] = e.request_id;
  j["prompt_sha256"] = e.prompt_sha256;
  j["params"] = to_json(e.params);
  j["response"] = e.response;
  return j;
}

inline std::vector<TranscriptEntry> load_transcript(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open transcript " + path);
  std::vector<TranscriptEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("request_id").get<std::string>(), j.at("prompt_sha256").get<std::string>(),
                     params_from_json(j.at("params")), j.at("response").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("bad transcript entry: ") + e.what());
    }
  }
  return out;
}

// Wraps another backend and records every call. Request ids are
// "<hash of prompt+params>-<occurrence>", so they do not depend on call timing.
class RecordingBackend final : public CompletionBackend {
 public:
  explicit RecordingBackend(CompletionBackend& inner) : inner_(inner) {}

  std::string complete(std::string_view prompt, const GenerationParams& params) override {
    const std::string key = request_key(prompt, params);
    std::string response = inner_.complete(prompt, params);
    std::lock_guard lock(mu_);
    const auto occurrence = occurrences_[key]++;
    std::string id = key + "-" + std::to_string(occurrence);
    spdlog::debug("backend {} request {} ({} prompt bytes)", inner_.name(), id, prompt.size());
    entries_.push_back({id, sha256_hex(prompt), params, response});
    prompts_.emplace(id, std::string(prompt));
    return response;
  }

  std::string name() const override { return inner_.name(); }

  // Entries sorted by request id.
  std::vector<TranscriptEntry> transcript() const {
    std::lock_guard lock(mu_);
    auto out = entries_;
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.request_id < b.request_id; });
    return out;
  }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

  void write_transcript(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write " + path);
    for (const auto& e : transcript()) out << to_json(e).dump() << '\n';
  }

  // Exact-match script reproducing every recorded response offline.
  void write_script(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write " + path);
    std::lock_guard lock(mu_);
    std::map<std::string, std::string> by_prompt;
    for (const auto& e : entries_) by_prompt.emplace(prompts_.at(e.request_id), e.response);
    for (const auto& [prompt, response] : by_prompt)
      out << to_json(ScriptRule{MatchKind::Exact, prompt, response}).dump() << '\n';
  }

 private:
  CompletionBackend& inner_;
  mutable std::mutex mu_;
  std::vector<TranscriptEntry> entries_;
  std::map<std::string, std::string> prompts_;
  std::map<std::string, std::size_t> occurrences_;
};

// Serves responses from a transcript by (prompt hash, params). Repeated
// requests consume recorded occurrences in order and then repeat the last.
class ReplayBackend final : public CompletionBackend {
 public:
  explicit ReplayBackend(const std::vector<TranscriptEntry>& transcript) {
    auto sorted = transcript;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.request_id < b.request_id; });
    for (const auto& e : sorted)
      responses_[slot(e.prompt_sha256, e.params)].push_back(e.response);
  }

  std::string complete(std::string_view prompt, const GenerationParams& params) override {
    std::lock_guard lock(mu_);
    auto it = responses_.find(slot(sha256_hex(prompt), params));
    if (it == responses_.end() || it->second.empty())
      throw ScriptMissError("transcript has no response for request " + request_key(prompt, params));
    std::string r = it->second.front();
    if (it->second.size() > 1) it->second.pop_front();
    return r;
  }

  std::string name() const override { return "replay"; }

 private:
  static std::string slot(const std::string& prompt_sha, const GenerationParams& p) {
    return prompt_sha + "|" + to_json(p).dump();
  }

  std::mutex mu_;
  std::map<std::string, std::deque<std::string>> responses_;
};

}  // namespace outfox
