#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "cslr/errors.hpp"

namespace cslr {

/// Flat `key = value` config file. `#` starts a comment, values may be quoted.
/// A `version` key is mandatory.
class FlatConfig {
 public:
  static FlatConfig parse_file(const std::filesystem::path& path);
  static FlatConfig parse_string(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;

  std::int64_t version() const { return get_int("version"); }

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

}  // namespace cslr
