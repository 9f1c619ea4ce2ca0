#pragma once

#include <stdexcept>
#include <string>

namespace rabichirp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation point outside the domain of a function, pulse window or τ map.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input (config keys, tables, pulse invariants).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// ω_αβ(t) ≤ 0: the two levels cross inside the working window.
class LevelCrossingError : public Error {
 public:
  using Error::Error;
};

/// μ_αβ(t) = 0 where the pulse is on.
class DegenerateCouplingError : public Error {
 public:
  using Error::Error;
};

/// The τ integrand is negative somewhere (μ_αβ < 0 under a positive envelope).
class OrientationError : public Error {
 public:
  using Error::Error;
};

/// τ value that maps to a whole interval of lab times (zero-envelope plateau).
class AmbiguityError : public Error {
 public:
  using Error::Error;
};

/// The adaptive integrator could not make progress.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double where)
      : Error(what), where_(where) {}

  /// Independent-variable value (t or τ) at which the step size underflowed.
  double where() const noexcept { return where_; }

 private:
  double where_;
};

/// The chirp iteration produced a non-positive frequency.
class DesignError : public Error {
 public:
  using Error::Error;
};

}  // namespace rabichirp
