// SPDX-License-Identifier: Apache-2.0
#pragma once

// Flat "key = value" text configuration, one pair per line, '#' starts a
// comment. Values are kept as strings and converted on demand.

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wts/binary_io.hpp"
#include "wts/error.hpp"

namespace wts {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(stripped.substr(0, eq));
      if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = trim(stripped.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) { return parse(io::read_file(path)); }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw Error("config: missing required key '" + key + "'");
    return it->second;
  }
  std::string str(const std::string& key, const std::string& fallback) const { return has(key) ? str(key) : fallback; }

  double real(const std::string& key) const { return to_real(key, str(key)); }
  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

  std::uint64_t integer(const std::string& key) const { return to_uint(key, str(key)); }
  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error("config: key '" + key + "' is not a boolean: " + v);
  }

  /// Comma-separated list.
  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream is(str(key));
    std::string item;
    while (std::getline(is, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  static double to_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) throw Error("config: key '" + key + "' is not a number: " + v);
    return out;
  }

  static std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    std::uint64_t out = 0;
    try {
      if (!v.empty() && v[0] != '-') out = std::stoull(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) throw Error("config: key '" + key + "' is not a non-negative integer: " + v);
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace wts
