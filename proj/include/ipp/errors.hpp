#pragma once

#include <stdexcept>
#include <string>

namespace ipp {

/// Malformed input text (map files, config files). Carries the 1-based line.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// A caller broke an operation's precondition (e.g. an unsafe joint action reached step()).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Factorization failure or non-finite values in a numeric routine.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or unsatisfiable configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric is undefined for the given inputs (no peaks, zero-mass ground truth).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ipp
