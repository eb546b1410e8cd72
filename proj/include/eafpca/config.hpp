#pragma once

#include "eafpca/core.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace eafpca {

// Flat key-value configuration:
//
//   # comment
//   kernel.family = epanechnikov
//   bandwidth.h_z = 0.1, 0.1
//
// Keys are dotted identifiers ([A-Za-z0-9_.]); values run to the end of the
// line with surrounding whitespace trimmed. A key may appear once per file.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  // Entries of `other` replace ours.
  void merge(const Config& other);

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma separated reals; empty when the key is absent.
  std::vector<double> get_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<double> parse_real_list(const std::string& text, const std::string& key);
// "3" -> {3}; "2..8" -> {2,...,8}; "2,4,6" -> {2,4,6}.
std::vector<int> parse_int_range(const std::string& text, const std::string& key);

}  // namespace eafpca
