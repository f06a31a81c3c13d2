#pragma once

#include <stdexcept>

namespace svshrink {

/// Bad arguments or malformed input data.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numeric backend failure (SVD non-convergence, root finder stall, ...).
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tied singular values; the SURE divergence has a zero denominator there.
class SingularityError : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

/// Data-driven noise-scale estimation is not possible for this spectrum.
class EstimationError : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

/// Every point of a selection grid was inadmissible.
class SelectionError : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

/// Malformed text input; the message carries file and line context.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace svshrink
