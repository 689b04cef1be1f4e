#pragma once
#include <stdexcept>
#include <string>

namespace dft {

// Error taxonomy shared by every module. Catch sites usually only care
// about the base type; tests pin the concrete one.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// bad user input: unknown keys, invalid values, violated preconditions
struct ConfigError : Error {
  using Error::Error;
};

// matrix/vector dimension mismatch
struct ShapeError : Error {
  using Error::Error;
};

// NaN/Inf where finite values are required
struct NumericError : Error {
  using Error::Error;
};

// API misuse, e.g. a tape replayed against a mutated net
struct StateError : Error {
  using Error::Error;
};

// malformed input data (CSV parse failures, bad checkpoint files)
struct DataError : Error {
  using Error::Error;
};

// filesystem failures
struct IoError : Error {
  using Error::Error;
};

}  // namespace dft
