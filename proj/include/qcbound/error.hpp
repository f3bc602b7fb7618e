#pragma once

#include <stdexcept>
#include <string>

namespace qcb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: bad parameters, degenerate geometry, malformed files.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed: divergent integral or series, solver did
/// not converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace qcb
