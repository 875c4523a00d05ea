#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vaxho {

// Flat `key = value` text configuration. Lines starting with '#' are
// comments; `[section]` headers prefix following keys as `section.key`;
// values may be wrapped in double quotes. Every lookup marks the key as
// used so that unknown keys can be reported.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(const std::string& key) const;
  void set(const std::string& key, std::string value);

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<std::string>> get_list(const std::string& key) const;
  std::optional<std::vector<double>> get_double_list(const std::string& key) const;

  // Year lists accept comma-separated entries and inclusive ranges "2000-2014".
  std::optional<std::vector<int>> get_years(const std::string& key) const;

  // Throws ConfigError naming every key never looked up.
  void reject_unused() const;

  const std::string& origin() const noexcept { return origin_; }
  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

  // Relative paths resolve against the directory of the loaded file.
  std::filesystem::path resolve_path(const std::string& value) const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string origin_;
  std::filesystem::path base_dir_;
};

std::vector<int> parse_year_list(const std::string& text);

}  // namespace vaxho
