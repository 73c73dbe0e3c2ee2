#pragma once

#include <stdexcept>
#include <string>

namespace nortasp {

// Bad user input: malformed files, inconsistent dimensions, invalid specs.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical routine failed to deliver a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation exceeded its configured work budget (nodes, iterations).
class ResourceLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition of a library call.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Fewer observations than an estimator needs.
class InsufficientDataError : public InputError {
 public:
  using InputError::InputError;
};

// Pearson correlation requested for a constant sample.
class UndefinedCorrelationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace nortasp
