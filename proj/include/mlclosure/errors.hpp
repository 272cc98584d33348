#pragma once

#include <stdexcept>
#include <string>

namespace mlclosure {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A constraint or symmetrizer sits exactly on the boundary of the
/// hyperbolicity region (singular system or vanishing denominator).
class BoundaryError : public Error {
 public:
  using Error::Error;
};

/// Two independent certificates disagreed.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or runaway state; carries the time at which it was detected.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double time)
      : Error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace mlclosure
