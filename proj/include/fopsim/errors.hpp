#pragma once

#include <stdexcept>
#include <string>

namespace fopsim {

// Base for every error the library raises on purpose. The CLI maps the
// concrete type to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A design or spec that violates its own invariants.
class InvalidDesign : public Error {
 public:
  using Error::Error;
};

// Bad configuration file or command line usage (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Optimization target that cannot be met in the search interval (exit code 3).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Broken internal guard, e.g. ray marching that fails to terminate (exit code 4).
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace fopsim
