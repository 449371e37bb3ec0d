#pragma once

#include <stdexcept>
#include <string>

namespace pmvi {

enum class ErrorKind {
  InvalidArgument,     // caller supplied something outside the documented domain
  OutOfRange,          // index outside the game's dimensions
  InvariantViolation,  // a model or output invariant does not hold
  SolverFailure,       // internal numerical routine failed; indicates a bug
  Io,
};

/// Exception type thrown by every routine in the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace pmvi
