#pragma once

#include <charconv>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "udfsketch/error.hpp"

namespace udfsketch {

/// Flat key=value configuration. Blank lines and lines starting with '#' are ignored;
/// keys may be dotted ("mask.lambda_focal").
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text) {
    KeyValueConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto trimmed = trim(line);
      if (trimmed.empty() || trimmed.front() == '#') continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string_view::npos)
        fail(ErrorCode::configuration_error, "line " + std::to_string(lineno) + ": expected key=value");
      const auto key = trim(trimmed.substr(0, eq));
      if (key.empty()) fail(ErrorCode::configuration_error, "line " + std::to_string(lineno) + ": empty key");
      cfg.values_[std::string(key)] = std::string(trim(trimmed.substr(eq + 1)));
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.contains(key); }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  long get_long(const std::string& key, long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      fail(ErrorCode::configuration_error, "key " + key + " is not an integer: " + s);
    return v;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(ErrorCode::configuration_error, "key " + key + " is not a number: " + it->second);
    }
  }

  /// Serialized with keys in sorted order.
  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  static std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace udfsketch
