#pragma once

#include <stdexcept>
#include <string>

namespace overfit {

// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// An iterative solver stopped without meeting its tolerance.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN or Inf produced where finite values are required.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration or file contents.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace overfit
