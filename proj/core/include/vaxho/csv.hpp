#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vaxho::csv {

// Minimal reader for the toolkit's own comma-separated formats: no quoting,
// no embedded commas, '.' decimal separator.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  // Reads the header line and checks it against `expected` exactly.
  void expect_header(std::string_view expected);

  // Advances to the next non-empty line. Returns false at end of file.
  bool next();

  std::size_t line_number() const noexcept { return line_no_; }
  std::size_t size() const noexcept { return fields_.size(); }
  std::string_view field(std::size_t column) const;

  // Numeric accessors report the (line, column) of a bad cell as ParseError.
  double number(std::size_t column) const;
  std::optional<double> optional_number(std::size_t column) const;
  long long integer(std::size_t column) const;

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::string line_;
  std::vector<std::string_view> fields_;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> split(std::string_view line, char sep = ',');

// Shortest decimal representation that round-trips to the same double.
std::string format_exact(double value);

// Fixed-precision representation with `digits` significant digits.
std::string format_significant(double value, int digits);

}  // namespace vaxho::csv
