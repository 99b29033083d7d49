#pragma once

#include <stdexcept>
#include <string>

namespace homo {

// Base for every error raised by the library. Subclasses carry the category
// the CLI maps onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, long expected, long actual)
      : Error(what + ": expected " + std::to_string(expected) + ", got " +
              std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  long expected() const { return expected_; }
  long actual() const { return actual_; }

 private:
  long expected_;
  long actual_;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

// Derivative requested where the schedule is singular (vp at t = 1).
class SingularityError : public RangeError {
 public:
  using RangeError::RangeError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class TapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace homo
