#pragma once

#include <stdexcept>
#include <string>

namespace bisam {

enum class ErrorKind {
  invalid_input,   // bad configuration or malformed data
  numerical,       // a numerical routine failed
  io,              // file could not be read or written
};

/// Error raised by every bisam component. `what()` carries the
/// human-readable message; `kind()` lets callers map to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_input(const std::string& message) {
  return Error(ErrorKind::invalid_input, message);
}

inline Error numerical_failure(const std::string& message) {
  return Error(ErrorKind::numerical, message);
}

}  // namespace bisam
