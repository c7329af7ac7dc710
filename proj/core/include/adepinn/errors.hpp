#pragma once

#include <stdexcept>
#include <string>

namespace adepinn {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed network architecture (empty or non-positive layer sizes,
/// mismatched adjacent widths).
struct InvalidArchitectureError : Error {
  using Error::Error;
};

/// Inputs that violate an operation's preconditions (dimension mismatch,
/// grids of different shape, empty point sets with nonzero weight, ...).
struct InvalidInputError : Error {
  using Error::Error;
};

/// A non-finite value was produced where a finite one is required.
struct NumericOverflowError : Error {
  using Error::Error;
};

/// Linear-algebra failure (non-positive-definite covariance, singular
/// system, residual norm not reached).
struct SolverFailureError : Error {
  using Error::Error;
};

/// Time integration could not proceed (CFL time step underflow).
struct StabilityError : Error {
  using Error::Error;
};

/// A sample plan is inconsistent with the requested loss assembly.
struct InvalidPlanError : Error {
  using Error::Error;
};

/// A metric is undefined for the given inputs (zero reference norm,
/// non-positive mass).
struct UndefinedMetricError : Error {
  using Error::Error;
};

}  // namespace adepinn
