#pragma once

#include <stdexcept>
#include <string>

namespace proxi2s {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input data or configuration (CLI exit code 2).
struct DataError : Error {
  using Error::Error;
};

// Unsupported model specification, e.g. a link combination with no procedure.
struct SpecError : DataError {
  using DataError::DataError;
};

// Numerical failures (CLI exit code 3).
struct NumericError : Error {
  using Error::Error;
};

struct RankDeficiencyError : NumericError {
  using NumericError::NumericError;
};

struct ConvergenceError : NumericError {
  using NumericError::NumericError;
};

struct SeparationError : NumericError {
  using NumericError::NumericError;
};

}  // namespace proxi2s
