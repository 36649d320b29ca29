#pragma once

#include <stdexcept>
#include <string>

namespace placeopt {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input, violated precondition, or inconsistent artifacts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An integer quantity does not fit the requested representation.
class OverflowError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The cost budget admits no placement.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double min_cost)
      : Error(what), min_cost_(min_cost) {}
  double min_cost() const noexcept { return min_cost_; }

 private:
  double min_cost_;
};

/// A computation would exceed its configured resource budget.
class ResourceError : public Error {
 public:
  ResourceError(const std::string& what, double estimate)
      : Error(what), estimate_(estimate) {}
  double estimate() const noexcept { return estimate_; }

 private:
  double estimate_;
};

/// The pluggable evaluator failed or returned unusable scores.
class EvaluatorError : public Error {
 public:
  using Error::Error;
};

}  // namespace placeopt
