#pragma once

#include <stdexcept>
#include <string>

namespace exgrg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, malformed or inconsistent input data (graphs, checkpoints).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, failed convergence, or other numerical breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Violated preconditions on shapes and arguments.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace exgrg
