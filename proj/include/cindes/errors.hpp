#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cindes {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch or an invalid network / matrix shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A reference distribution does not cover the observed responses.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (t <= 0, k < 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values produced by optimization or sampling.
class NumericError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SamplerDivergedError : public NumericError {
 public:
  SamplerDivergedError(const std::string& what, int step)
      : NumericError(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// Malformed input data (CSV rows, model files).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Bad command-line or configuration input.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace cindes
