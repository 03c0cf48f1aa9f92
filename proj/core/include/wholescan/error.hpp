#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wholescan {

// Root of every error raised by the library. Callers that only need to know
// "this frame / input is unusable" can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Geometry payload cannot produce a measurement (too few points, collinear,
// non-elliptic conic, filled blob instead of an outline).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// Linear-biometric heatmap has only one distinct maximum.
class SingleMaximum : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Scale-bar scan line shows no usable tick periodicity.
class NoPeriodicity : public Error {
 public:
  using Error::Error;
};

class GAOutOfRange : public Error {
 public:
  using Error::Error;
};

class InvalidScenario : public Error {
 public:
  using Error::Error;
};

class EmptyIntersection : public Error {
 public:
  using Error::Error;
};

// Bad configuration (unreadable file, invalid values, schema violations).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace wholescan
