#pragma once

#include <stdexcept>
#include <string>

namespace blpid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (CSV schema, share values, inconsistent dimensions).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument (unknown keys, out-of-range options).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed (non-convergence, degenerate integrals).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The Berry contraction did not reach tolerance; carries the last residual.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : NumericalError(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// An equilibrium object is undefined (zero denominator integral).
class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace blpid
