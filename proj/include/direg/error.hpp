#pragma once

#include <stdexcept>
#include <string>

namespace direg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input failed a precondition (bad dimensions, non-unit vectors, unknown names).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A conic solve did not reach an optimal status.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// A behavior lies outside the set a computation requires (e.g. outside Q~_l).
class InfeasibleInput : public Error {
 public:
  using Error::Error;
};

}  // namespace direg
