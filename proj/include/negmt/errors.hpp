#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace negmt {

/// Base for every error raised by the toolkit. `exit_code()` is the process
/// status the command-line front end reports for it.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

/// Bad command line or option value.
class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

/// Input that parsed but breaks a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Text input whose layout is wrong. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Binary container that is truncated, has bad magic, or inconsistent extents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace negmt
