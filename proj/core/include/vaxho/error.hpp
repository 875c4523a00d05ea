#pragma once

#include <stdexcept>
#include <string>

namespace vaxho {

// Error categories map one-to-one onto the CLI exit codes.
enum class ExitCode : int {
  kOk = 0,
  kDataError = 2,
  kNumericalError = 3,
  kConfigError = 4,
};

/// Malformed, missing or inconsistent input data (structural or parse level).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A cell that could not be parsed; carries the 1-based line and column.
class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, std::size_t column,
             const std::string& what);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Singular systems, failed residual checks, rank deficiency.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown keys, unparsable values, missing paths.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vaxho
