#pragma once

#include <stdexcept>
#include <string>

namespace drmdit {

// Every error carries the process exit code the CLI reports for it.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, int exit_code)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

// Bad argument, shape mismatch, out-of-range hyperparameter.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(what, 2) {}
};

// Unusable input data: missing file, non-finite values, bad labels.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, 3) {}
};

// Numerical breakdown: zero traces, singular matrices, non-finite gradients.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what, 4) {}
};

class DegeneracyError : public NumericError {
 public:
  explicit DegeneracyError(const std::string& what) : NumericError(what) {}
};

class SingularityError : public NumericError {
 public:
  explicit SingularityError(const std::string& what) : NumericError(what) {}
};

class TrainingError : public NumericError {
 public:
  explicit TrainingError(const std::string& what) : NumericError(what) {}
};

// Band selection or ranking metrics asked of single-class labels.
class ThresholdError : public DataError {
 public:
  explicit ThresholdError(const std::string& what) : DataError(what) {}
};

class MetricError : public DataError {
 public:
  explicit MetricError(const std::string& what) : DataError(what) {}
};

}  // namespace drmdit
