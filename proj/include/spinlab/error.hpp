#pragma once

#include <stdexcept>
#include <string>

namespace spinlab {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Evaluation requested where the quantity is undefined (outside the
/// lattice reach, outside the domain box, non-finite samples).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A study aborted because one of its preconditions failed.
class StudyError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration. `line` is 1-based, 0 when the
/// problem is not attached to a single line.
class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& message)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace spinlab
