#pragma once

#include <stdexcept>
#include <string>

namespace wordchoice {

// Error categories surfaced to callers. The CLI maps kUsage to exit
// status 1 and everything else to exit status 2.
enum class ErrorKind {
  kUsage,
  kDimension,
  kFormat,
  kTruncated,
  kRejected,
  kNonFinite,
  kInvalidCase,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error(ErrorKind::kDimension, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what)
      : Error(ErrorKind::kFormat, what) {}
};

class TruncatedError : public Error {
 public:
  explicit TruncatedError(const std::string& what)
      : Error(ErrorKind::kTruncated, what) {}
};

class RejectedError : public Error {
 public:
  explicit RejectedError(const std::string& what)
      : Error(ErrorKind::kRejected, what) {}
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& what)
      : Error(ErrorKind::kNonFinite, what) {}
};

class InvalidCaseError : public Error {
 public:
  explicit InvalidCaseError(const std::string& what)
      : Error(ErrorKind::kInvalidCase, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

}  // namespace wordchoice
