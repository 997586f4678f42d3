#pragma once

#include <stdexcept>
#include <string>

namespace pjfit {

// Base of every error raised by the library. Each subclass maps to one
// failure category so callers (and the CLI exit-code logic) can dispatch on
// type instead of parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Scalar expected, tensor of higher rank supplied.
class RankError : public Error {
 public:
  using Error::Error;
};

// Empty sequence, fully masked attention, empty pooling set.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace pjfit
