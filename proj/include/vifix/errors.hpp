#pragma once

#include <stdexcept>
#include <string>

namespace vifix {

// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a precondition that is not a tunable parameter
// (dimension mismatch, non-finite coordinates, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// A scalar parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// The step parameter lambda does not give a positive omega.
class InfeasibleLambda : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

// Root finding or another numerical routine failed where it should not.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Descriptors or a run configuration are inconsistent.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

// An independent oracle could not certify its own answer.
class OracleFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace vifix
