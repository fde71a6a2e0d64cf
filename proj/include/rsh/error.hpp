#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rsh {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A compressed structure violates one of its invariants.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Internal consistency check failed (e.g. oracle disagreement).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace rsh
