// ============================================================================
// error.hpp -- exception hierarchy shared by every oisac module
// ============================================================================
#pragma once

#include <stdexcept>
#include <string>

namespace oisac {

/// Base class; catch this to handle any library failure.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (CLI exit code 2).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Underflow / overflow / non-finite intermediate (CLI exit code 3).
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Iterative solver hit its cap before reaching tolerance (CLI exit code 3).
class ConvergenceError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

inline void require_domain(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace detail
}  // namespace oisac
