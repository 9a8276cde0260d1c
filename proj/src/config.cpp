#include "convo_anon/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include "convo_anon/errors.hpp"

namespace convo_anon {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": missing '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!kv.entries_.emplace(key, value).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KeyValues KeyValues::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse(in);
}

std::optional<std::string> KeyValues::take_string(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  std::string v = it->second;
  entries_.erase(it);
  return v;
}

std::optional<double> KeyValues::take_real(const std::string& key) {
  auto s = take_string(key);
  if (!s) return std::nullopt;
  double x = 0.0;
  auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), x);
  if (ec != std::errc{} || p != s->data() + s->size() || !std::isfinite(x)) {
    throw ConfigError("'" + key + "' expects a real, got '" + *s + "'");
  }
  return x;
}

std::optional<std::uint64_t> KeyValues::take_count(const std::string& key) {
  auto s = take_string(key);
  if (!s) return std::nullopt;
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), x);
  if (ec != std::errc{} || p != s->data() + s->size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + *s + "'");
  }
  return x;
}

std::optional<bool> KeyValues::take_flag(const std::string& key) {
  auto s = take_string(key);
  if (!s) return std::nullopt;
  if (*s == "1" || *s == "true" || *s == "yes") return true;
  if (*s == "0" || *s == "false" || *s == "no") return false;
  throw ConfigError("'" + key + "' expects a flag, got '" + *s + "'");
}

void KeyValues::expect_consumed() const {
  if (entries_.empty()) return;
  throw ConfigError("unknown config key '" + entries_.begin()->first + "'");
}

}  // namespace convo_anon
