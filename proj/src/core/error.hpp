#pragma once

#include <stdexcept>
#include <string>

namespace roadfc {

// Values match the CLI exit codes and the C API status codes.
enum class ErrorCode : int {
  Internal = 1,
  Input = 2,
  Diverged = 3,
  Config = 4,
  InvalidArgument = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Precondition or shape violation in a library call.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCode::InvalidArgument, what) {}
};

/// Unreadable file, schema mismatch, or malformed input data.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorCode::Input, what) {}
};

/// Non-finite loss or gradient during optimization.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what)
      : Error(ErrorCode::Diverged, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::Config, what) {}
};

}  // namespace roadfc
