#pragma once

#include <stdexcept>
#include <string>

namespace sharednav {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or precondition violation (bad shapes, out-of-range abscissae, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical method failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or version-mismatched file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// No collision-free path could be found.
class NoPathError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace sharednav
