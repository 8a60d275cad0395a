#pragma once

#include <stdexcept>
#include <string>

namespace vpb {

enum class ErrorKind { Usage = 1, Numerical = 2, IO = 3 };

/// Exception carrying the exit-code category used by the C API and the CLI.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void usage_error(const std::string& msg) { throw Error(ErrorKind::Usage, msg); }
[[noreturn]] inline void numerical_error(const std::string& msg) { throw Error(ErrorKind::Numerical, msg); }
[[noreturn]] inline void io_error(const std::string& msg) { throw Error(ErrorKind::IO, msg); }

}  // namespace vpb
