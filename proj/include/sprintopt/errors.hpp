#pragma once

#include <stdexcept>
#include <string>

namespace sprintopt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by caller-supplied data.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

/// Operation not allowed in the current state (e.g. sprint already running).
class Conflict : public Error {
 public:
  using Error::Error;
};

/// Not enough data to perform an operation (e.g. fewer than k trials).
class InsufficientData : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Why a priming or lineage edge was rejected. The string forms are part of
/// the service and CLI contract.
enum class PrimingViolation { fidelity_mismatch, thread_isolation, init_mismatch };

inline const char* to_string(PrimingViolation v) {
  switch (v) {
    case PrimingViolation::fidelity_mismatch: return "fidelity-mismatch";
    case PrimingViolation::thread_isolation: return "thread-isolation";
    case PrimingViolation::init_mismatch: return "init-mismatch";
  }
  return "unknown";
}

class PrimingError : public Error {
 public:
  PrimingError(PrimingViolation reason, const std::string& message)
      : Error(message), reason_(reason) {}
  PrimingViolation reason() const noexcept { return reason_; }

 private:
  PrimingViolation reason_;
};

}  // namespace sprintopt
