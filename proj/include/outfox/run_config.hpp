#pragma once

// Key-value run configuration and run manifests.
//
// Config file format: one `key = value` per line, `#` starts a comment.
// Precedence is resolved by the caller: flag > file > built-in default.

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "outfox/error.hpp"
#include "outfox/hashing.hpp"

namespace outfox {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
      auto key = trim(line.substr(0, eq));
      auto value = trim(line.substr(eq + 1));
      if (key.empty()) throw ParseError(lineno, "empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config " + path);
    return parse(in);
  }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_string(const std::string& key, std::string fallback) const {
    return get(key).value_or(std::move(fallback));
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      auto x = std::stoll(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      return x;
    } catch (const std::exception&) {
      throw ArgumentError("config key '" + key + "' expects an integer, got '" + *v + "'");
    }
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      auto x = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      return x;
    } catch (const std::exception&) {
      throw ArgumentError("config key '" + key + "' expects a number, got '" + *v + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ArgumentError("config key '" + key + "' expects a boolean, got '" + *v + "'");
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  static std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

// Everything needed to re-run a command: effective settings, seeds, and
// digests of inputs and outputs. Deliberately free of timestamps so that
// re-runs against the mock backend are byte-identical.
class Manifest {
 public:
  explicit Manifest(std::string command) { doc_["command"] = std::move(command); }

  void setting(const std::string& key, nlohmann::ordered_json value) {
    doc_["settings"][key] = std::move(value);
  }
  void seed(const std::string& key, long long value) { doc_["seeds"][key] = value; }
  void input(const std::string& path) { doc_["inputs"][path] = file_sha256_hex(path); }
  void output(const std::string& path) { doc_["outputs"][path] = file_sha256_hex(path); }
  void note(const std::string& key, nlohmann::ordered_json value) {
    doc_["notes"][key] = std::move(value);
  }

  std::string config_hash() const {
    const auto& s = doc_.contains("settings") ? doc_["settings"] : nlohmann::ordered_json::object();
    return sha256_hex(s.dump()).substr(0, 16);
  }

  nlohmann::ordered_json document() const {
    auto d = doc_;
    d["config_hash"] = config_hash();
    return d;
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write " + path);
    out << document().dump(2) << '\n';
  }

 private:
  nlohmann::ordered_json doc_ = nlohmann::ordered_json::object();
};

}  // namespace outfox
