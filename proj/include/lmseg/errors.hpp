#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lmseg {

// Shapes of operands disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation (empty input,
// ratio >= 1, corpus too small, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke a documented precondition (bad index, cover violation).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Tag outside the O / B-X / I-X scheme.
class SchemeError : public ParseError {
 public:
  using ParseError::ParseError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent configuration or checkpoint/vocab mismatch.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optimizer was handed gradients that do not account for every parameter.
class AccountingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lmseg
