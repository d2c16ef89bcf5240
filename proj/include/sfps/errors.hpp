#pragma once

#include <stdexcept>
#include <string>

namespace sfps {

// Base for every error raised by the library. The CLI maps DataError
// subclasses to exit code 2 and SolverError subclasses to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateGridError : public DataError {
 public:
  using DataError::DataError;
};

class SingularCovariateError : public DataError {
 public:
  SingularCovariateError(const std::string& what, double eigenvalue)
      : DataError(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public SolverError {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : SolverError(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

class InfeasibleError : public SolverError {
 public:
  using SolverError::SolverError;
};

class CollinearityError : public SolverError {
 public:
  using SolverError::SolverError;
};

class NotPositiveDefiniteError : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace sfps
