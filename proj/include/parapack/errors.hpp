#pragma once

#include <stdexcept>
#include <string>

namespace parapack {

// Base for every error raised by the library. Callers that only need to
// report a failure can catch this; the subclasses carry the category.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (CSV rows, JSON documents).
class ParseError : public Error {
public:
  using Error::Error;
};

// A value is outside the domain an operation accepts.
class DomainError : public Error {
public:
  using Error::Error;
};

// A branch with non-positive series resistance makes the Kirchhoff
// system singular.
class SingularityError : public Error {
public:
  using Error::Error;
};

// Step-size underflow or a non-finite derivative inside the ODE solver.
class IntegrationError : public Error {
public:
  using Error::Error;
};

// Schema violation in a run configuration. `pointer` is a JSON pointer to
// the offending node.
class ConfigError : public Error {
public:
  ConfigError(std::string pointer, const std::string &message)
      : Error(pointer.empty() ? message : pointer + ": " + message), pointer_(std::move(pointer)) {}

  const std::string &pointer() const noexcept { return pointer_; }

private:
  std::string pointer_;
};

} // namespace parapack
