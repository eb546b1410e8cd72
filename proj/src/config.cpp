#include "eafpca/config.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace eafpca {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  return true;
}

double to_double(const std::string& s, const std::string& key) {
  const std::string t = trim(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || *end != '\0' || errno == ERANGE)
    throw Error("cli.config", fmt::format("{}: '{}' is not a number", key, s));
  return v;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, no, "expected 'key = value'", "cli.config");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ParseError(origin, no, "invalid key '" + key + "'", "cli.config");
    if (c.has(key)) throw ParseError(origin, no, "duplicate key '" + key + "'", "cli.config");
    c.values_[key] = trim(line.substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cli.config", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<std::string> Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  return v ? to_double(*v, key) : fallback;
}

long Config::get_int(const std::string& key, long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  char* end = nullptr;
  const long x = std::strtol(v->c_str(), &end, 10);
  if (v->empty() || *end != '\0')
    throw Error("cli.config", fmt::format("{}: '{}' is not an integer", key, *v));
  return x;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw Error("cli.config", fmt::format("{}: '{}' is not a boolean", key, *v));
}

std::vector<double> Config::get_list(const std::string& key) const {
  auto v = get(key);
  return v ? parse_real_list(*v, key) : std::vector<double>{};
}

std::string Config::to_text() const {
  std::string s;
  for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
  return s;
}

std::vector<double> parse_real_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(item, key));
  if (out.empty()) throw Error("cli.config", key + ": empty list");
  return out;
}

std::vector<int> parse_int_range(const std::string& text, const std::string& key) {
  const auto dots = text.find("..");
  std::vector<int> out;
  if (dots != std::string::npos) {
    const int lo = static_cast<int>(to_double(text.substr(0, dots), key));
    const int hi = static_cast<int>(to_double(text.substr(dots + 2), key));
    if (hi < lo) throw Error("cli.config", key + ": empty range '" + text + "'");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  for (double v : parse_real_list(text, key)) {
    if (v != static_cast<int>(v)) throw Error("cli.config", key + ": '" + text + "' is not integral");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

}  // namespace eafpca
