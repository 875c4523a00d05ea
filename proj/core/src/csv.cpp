#include "vaxho/csv.hpp"

#include "vaxho/error.hpp"

#include <fmt/format.h>

#include <array>
#include <charconv>
#include <cmath>

namespace vaxho {

ParseError::ParseError(const std::string& file, std::size_t line, std::size_t column,
                       const std::string& what)
    : DataError(fmt::format("{}: line {}, column {}: {}", file, line, column, what)),
      line_(line),
      column_(column) {}

}  // namespace vaxho

namespace vaxho::csv {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

Reader::Reader(const std::filesystem::path& path) : path_(path.string()), in_(path) {
  if (!in_) throw DataError(fmt::format("cannot open '{}'", path_));
}

void Reader::expect_header(std::string_view expected) {
  if (!next()) throw DataError(fmt::format("{}: empty file, expected header '{}'", path_, expected));
  if (line_ != expected) {
    throw DataError(fmt::format("{}: line {}: header '{}' does not match expected '{}'", path_,
                                line_no_, line_, expected));
  }
}

bool Reader::next() {
  while (std::getline(in_, line_)) {
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    if (line_.empty()) continue;
    fields_ = split(line_);
    return true;
  }
  fields_.clear();
  return false;
}

std::string_view Reader::field(std::size_t column) const {
  if (column >= fields_.size()) {
    throw ParseError(path_, line_no_, column + 1,
                     fmt::format("missing field (row has {} fields)", fields_.size()));
  }
  return fields_[column];
}

double Reader::number(std::size_t column) const {
  const auto text = field(column);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError(path_, line_no_, column + 1, fmt::format("non-numeric value '{}'", text));
  }
  return value;
}

std::optional<double> Reader::optional_number(std::size_t column) const {
  if (column >= fields_.size() || fields_[column].empty()) return std::nullopt;
  return number(column);
}

long long Reader::integer(std::size_t column) const {
  const auto text = field(column);
  long long value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ParseError(path_, line_no_, column + 1, fmt::format("non-integer value '{}'", text));
  }
  return value;
}

std::string format_exact(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::string format_significant(double value, int digits) {
  if (value == 0.0) return "0";  // drops the sign of -0
  return fmt::format("{:.{}g}", value, digits);
}

}  // namespace vaxho::csv
