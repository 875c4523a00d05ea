#include "vaxho/config.hpp"

#include "vaxho/error.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace vaxho {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(fmt::format("config key '{}': cannot parse '{}' as a number", key, text));
  }
  return value;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    // keep '#' inside quoted values
    if (hash != std::string::npos && std::count(line.begin(), line.begin() + hash, '"') % 2 == 0) {
      line.erase(hash);
    }
    const auto body = trim(line);
    if (body.empty()) continue;
    if (body.front() == '[' && body.back() == ']') {
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value'", origin, line_no));
    }
    auto key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", origin, line_no));
    if (!section.empty()) key = section + "." + key;
    if (cfg.values_.count(key)) {
      throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", origin, line_no, key));
    }
    cfg.values_[key] = unquote(trim(std::string_view(body).substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto cfg = parse(buffer.str(), path.string());
  cfg.base_dir_ = path.parent_path();
  return cfg;
}

bool KeyValueConfig::contains(const std::string& key) const { return values_.count(key) > 0; }

void KeyValueConfig::set(const std::string& key, std::string value) {
  values_[key] = std::move(value);
}

std::optional<std::string> KeyValueConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

std::optional<double> KeyValueConfig::get_double(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_number<double>(key, *s);
}

std::optional<std::int64_t> KeyValueConfig::get_int(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_number<std::int64_t>(key, *s);
}

std::optional<bool> KeyValueConfig::get_bool(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  if (*s == "true" || *s == "1" || *s == "yes" || *s == "on") return true;
  if (*s == "false" || *s == "0" || *s == "no" || *s == "off") return false;
  throw ConfigError(fmt::format("config key '{}': expected a boolean, got '{}'", key, *s));
}

std::optional<std::vector<std::string>> KeyValueConfig::get_list(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  std::string text = *s;
  if (text.size() >= 2 && text.front() == '[' && text.back() == ']') {
    text = text.substr(1, text.size() - 2);
  }
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = unquote(trim(item));
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::optional<std::vector<double>> KeyValueConfig::get_double_list(const std::string& key) const {
  auto items = get_list(key);
  if (!items) return std::nullopt;
  std::vector<double> out;
  for (const auto& item : *items) out.push_back(parse_number<double>(key, item));
  return out;
}

std::vector<int> parse_year_list(const std::string& text) {
  std::vector<int> years;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dash = item.find('-', 1);
    if (dash != std::string::npos) {
      const int lo = parse_number<int>("years", trim(item.substr(0, dash)));
      const int hi = parse_number<int>("years", trim(item.substr(dash + 1)));
      if (hi < lo) throw ConfigError(fmt::format("empty year range '{}'", item));
      for (int y = lo; y <= hi; ++y) years.push_back(y);
    } else {
      years.push_back(parse_number<int>("years", item));
    }
  }
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());
  return years;
}

std::optional<std::vector<int>> KeyValueConfig::get_years(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  std::string text = *s;
  if (text.size() >= 2 && text.front() == '[' && text.back() == ']') {
    text = text.substr(1, text.size() - 2);
  }
  return parse_year_list(text);
}

void KeyValueConfig::reject_unused() const {
  std::vector<std::string> unknown;
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) unknown.push_back(key);
  }
  if (!unknown.empty()) {
    throw ConfigError(fmt::format("{}: unknown config key(s): {}", origin_, fmt::join(unknown, ", ")));
  }
}

std::filesystem::path KeyValueConfig::resolve_path(const std::string& value) const {
  std::filesystem::path p(value);
  if (p.is_relative() && !base_dir_.empty()) return base_dir_ / p;
  return p;
}

}  // namespace vaxho
