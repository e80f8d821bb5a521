#pragma once

#include <stdexcept>
#include <string>

namespace nlgpe {

/// Base class for all library errors. The CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad config values, shape mismatches, violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A computation failed: blow-up, lost positivity, non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlgpe
