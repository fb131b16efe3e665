#pragma once

#include <stdexcept>
#include <string>

namespace cheatt {

// Base class for all library errors. The CLI maps each category to a
// distinct exit code.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension mismatch between operands.
class ShapeError : public Error {
public:
  using Error::Error;
};

// A documented precondition was violated (non-symmetric input to the
// symmetric eigensolver, non-scalar loss node, ...).
class ContractError : public Error {
public:
  using Error::Error;
};

// Iterative solver exhausted its sweep/iteration budget.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

// Scalar argument outside its admissible range.
class ParameterError : public Error {
public:
  using Error::Error;
};

// Malformed or inconsistent input data (CSV parsing, ragged rows, ...).
class DataError : public Error {
public:
  using Error::Error;
};

// Invalid experiment or model configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Metric undefined for the given inputs (single-class labels, ...).
class MetricError : public Error {
public:
  using Error::Error;
};

}  // namespace cheatt
