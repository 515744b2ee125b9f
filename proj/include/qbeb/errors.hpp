#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qbeb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation
/// (theta <= 0, gamma <= 1/2, level outside [0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration (grid/weights mismatch, bad flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The mixture assigns (numerically) zero probability to an observed count.
class DegenerateLikelihood : public Error {
 public:
  DegenerateLikelihood(std::uint64_t y, std::uint64_t n, const std::string& what)
      : Error(what), y_(y), n_(n) {}

  std::uint64_t y() const noexcept { return y_; }
  /// Number of observations consumed before the failing one.
  std::uint64_t n() const noexcept { return n_; }

 private:
  std::uint64_t y_;
  std::uint64_t n_;
};

/// No grid size satisfies the discretization condition below the scan limit.
class SpecInfeasible : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized state or input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace qbeb
