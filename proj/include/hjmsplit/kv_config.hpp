#pragma once

// Flat TOML-style key/value files: `key = number`, `key = "text"`,
// `key = [n1, n2, ...]`, `#` comments.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hjmsplit/errors.hpp"

namespace hjmsplit {

class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in, const std::string& origin = "config") {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(body.substr(0, eq));
      const std::string value = trim(body.substr(eq + 1));
      if (key.empty() || value.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key or value");
      if (!kv.entries_.emplace(key, value).second)
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return kv;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return parse(in, path);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  double number(const std::string& key) const { return to_number(key, raw(key)); }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  long long integer(const std::string& key) const {
    const double v = number(key);
    if (v != static_cast<double>(static_cast<long long>(v)))
      throw ConfigError(origin_ + ": '" + key + "' must be an integer");
    return static_cast<long long>(v);
  }
  long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }

  std::string text(const std::string& key) const {
    std::string v = raw(key);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    return v;
  }
  std::string text(const std::string& key, const std::string& fallback) const { return has(key) ? text(key) : fallback; }

  std::vector<double> array(const std::string& key) const {
    const std::string v = raw(key);
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
      throw ConfigError(origin_ + ": '" + key + "' must be an array [..]");
    std::vector<double> out;
    std::string inner = v.substr(1, v.size() - 2);
    std::stringstream items(inner);
    std::string item;
    while (std::getline(items, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      out.push_back(to_number(key, item));
    }
    return out;
  }

  /// Throws on keys outside `allowed` (unknown keys are errors).
  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : entries_)
      if (!allowed.count(k)) throw ConfigError(origin_ + ": unknown key '" + k + "'");
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  const std::string& raw(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
    return it->second;
  }

  double to_number(const std::string& key, const std::string& s) const {
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
      throw ConfigError(origin_ + ": '" + key + "' has non-numeric value '" + s + "'");
    return value;
  }

  std::string origin_;
  std::map<std::string, std::string> entries_;
};

/// Shortest decimal text that parses back to the same double.
inline std::string format_exact(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

inline std::string format_array(const std::vector<double>& values) {
  std::string s = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ", ";
    s += format_exact(values[i]);
  }
  return s + "]";
}

}  // namespace hjmsplit
