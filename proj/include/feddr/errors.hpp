#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace feddr {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

struct InvalidArgument : Error {
  using Error::Error;
};

// A documented precondition of an operation does not hold.
struct PreconditionViolation : Error {
  using Error::Error;
};

struct NonFiniteValue : Error {
  using Error::Error;
};

// Iterative solver hit its cap before the stopping test passed.
struct NonConvergence : Error {
  NonConvergence(std::string what, std::vector<double> best, double best_accuracy)
      : Error(std::move(what)), best_iterate(std::move(best)), best_accuracy(best_accuracy) {}
  std::vector<double> best_iterate;
  double best_accuracy;
};

struct Divergence : Error {
  using Error::Error;
};

// Stepsizes rejected by the descent certificate.
struct StepsizeRejected : Error {
  using Error::Error;
};

// A theory constant is non-positive for the supplied inputs.
struct ConstantRejected : Error {
  ConstantRejected(std::string constant, double value)
      : Error(constant + " is not positive (" + std::to_string(value) + ")"),
        constant(std::move(constant)), value(value) {}
  std::string constant;
  double value;
};

struct ConfigError : Error {
  using Error::Error;
};

struct TraceError : Error {
  using Error::Error;
};

}  // namespace feddr
