#pragma once

#include <stdexcept>
#include <string>

namespace commshift {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorKind { usage = 1, data = 2, internal = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Bad invocation: unknown flag, missing argument, refusing to overwrite.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(ErrorKind::usage, msg) {}
};

// Unreadable or malformed input, missing artifact, corrupt container.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(ErrorKind::data, msg) {}
};

// Broken internal invariant; always a bug.
class InternalError : public Error {
 public:
  explicit InternalError(const std::string& msg) : Error(ErrorKind::internal, msg) {}
};

}  // namespace commshift
