#pragma once

#include <stdexcept>
#include <string>

namespace gridrisk {

/// Base class for every domain error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

private:
  int line_;
};

/// Structurally well-formed data that violates a model invariant.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Vector or matrix sizes that do not agree.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// The LP solver could not produce an answer (unbounded, iteration limit, numerical failure).
class SolverError : public Error {
public:
  using Error::Error;
};

/// Lookup by name or index that is out of range.
class LookupError : public Error {
public:
  using Error::Error;
};

/// Surrogate training diverged or was given unusable data.
class TrainingError : public Error {
public:
  using Error::Error;
};

/// A file could not be opened, read, or written. Not derived from Error: callers treat
/// it as an environment problem rather than a domain failure.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace gridrisk
