#pragma once

#include <stdexcept>
#include <string>

namespace odebn {

/// Error category, mapped to distinct process exit codes by the CLI.
enum class ErrorKind {
  Validation,  // bad input: parse errors, broken invariants, bad configs
  Numeric,     // non-finite states, degenerate weights, domain errors
  Io,          // missing or unreadable files
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  int exit_code() const {
    switch (kind_) {
      case ErrorKind::Validation: return 2;
      case ErrorKind::Numeric: return 3;
      case ErrorKind::Io: return 4;
    }
    return 1;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_validation(const std::string& msg) {
  throw Error(ErrorKind::Validation, msg);
}

[[noreturn]] inline void throw_numeric(const std::string& msg) {
  throw Error(ErrorKind::Numeric, msg);
}

[[noreturn]] inline void throw_io(const std::string& msg) {
  throw Error(ErrorKind::Io, msg);
}

}  // namespace odebn
