#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nlop {

/// Bad input: parameters out of range, unknown names, malformed configs.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not deliver a trustworthy value.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Function evaluated outside its domain (division by zero, log of a
/// non-positive number, derivative on a singular diagonal, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct SyntaxError : ValidationError {
  SyntaxError(const std::string& what, std::size_t offset)
      : ValidationError(what + " at byte " + std::to_string(offset)), offset(offset) {}
  std::size_t offset;
};

}  // namespace nlop
