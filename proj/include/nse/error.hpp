#pragma once

#include <stdexcept>
#include <string>

namespace nse {

/// Base class for every error raised by the library. `kind()` drives the CLI
/// exit code: validation problems map to 2, numeric failures to 3.
class Error : public std::runtime_error {
 public:
  enum class Kind { Validation, Numeric };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Parameter outside the family's domain, or a probability outside (0,1).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(Kind::Validation, what) {}
};

/// A data point outside the support of the distribution being evaluated.
class SupportError : public Error {
 public:
  SupportError(const std::string& what, std::size_t index)
      : Error(Kind::Validation, what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Invalid input data (non-finite, non-positive where positivity is required).
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t index)
      : Error(Kind::Validation, what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Arguments outside a validated computational range (e.g. n too large for
/// exact enumeration).
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(Kind::Validation, what) {}
};

class EmptyIndexSetError : public Error {
 public:
  explicit EmptyIndexSetError(const std::string& what) : Error(Kind::Validation, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Kind::Validation, what) {}
};

/// Quadrature, root finding or optimisation failed to reach its target.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, double achieved = 0.0)
      : Error(Kind::Numeric, what), achieved_(achieved) {}
  /// Achieved tolerance (quadrature) or best objective value (optimisation).
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

}  // namespace nse
