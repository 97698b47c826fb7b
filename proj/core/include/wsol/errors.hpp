#pragma once

#include <stdexcept>
#include <string>

namespace wsol {

// Error categories. Each maps to one failure class callers are expected to
// distinguish; the CLI turns some of them into stable exit codes.

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericError : std::domain_error {
  using std::domain_error::domain_error;
};

struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Raised by the finite-difference harness when the checked function is not
/// a pure function of its inputs.
struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inconsistent evaluation inputs (e.g. a score map without ground truth).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file contents (bad magic, version, truncation).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Training produced a non-finite loss.
struct NonFiniteLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace wsol
