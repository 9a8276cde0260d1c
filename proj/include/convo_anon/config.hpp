#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

namespace convo_anon {

/// Flat `key = value` settings. Consumers take the keys they understand and
/// finally call `expect_consumed()` so that typos surface as ConfigError.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in);
  static KeyValues read_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  bool contains(const std::string& key) const { return entries_.count(key) > 0; }

  std::optional<std::string> take_string(const std::string& key);
  std::optional<double> take_real(const std::string& key);
  std::optional<std::uint64_t> take_count(const std::string& key);
  std::optional<bool> take_flag(const std::string& key);

  void expect_consumed() const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace convo_anon
