#pragma once

#include <stdexcept>
#include <string>

namespace ssx {

// Error taxonomy mirrored by the C API status codes and the CLI exit codes:
// Validation -> 1, Numeric -> 2, Io -> 3 (CLI folds Io into 1).
enum class ErrorCode { Validation = 1, Numeric = 2, Io = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorCode::Validation, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorCode::Numeric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::Io, what) {}
};

}  // namespace ssx
