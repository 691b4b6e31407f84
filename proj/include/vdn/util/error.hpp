#pragma once

#include <stdexcept>
#include <string>

namespace vdn {

// Raised when shapes, labels or options are inconsistent with each other.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised for inputs on which an operation is undefined (zero vectors, ...).
class DegenerateInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Raised when a caller breaks a documented precondition on values.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Raised on malformed archives, checkpoints and other on-disk formats.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when training produces a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vdn
