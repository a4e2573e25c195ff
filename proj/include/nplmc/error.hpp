#pragma once

#include <stdexcept>
#include <string>

namespace nplmc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed inputs: wrong shapes, invalid probability vectors, bad config.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// A documented precondition does not hold (e.g. too few realisations).
class PreconditionError : public Error {
  public:
    using Error::Error;
};

/// Problem has no solution under the requested constraints.
class InfeasibleError : public Error {
  public:
    explicit InfeasibleError(const std::string &what, double margin = 0.0)
        : Error(what), margin_(margin) {}
    [[nodiscard]] double margin() const noexcept { return margin_; }

  private:
    double margin_;
};

/// Problem is well-formed but has no meaningful answer (all-zero weights).
class DegenerateError : public Error {
  public:
    using Error::Error;
};

/// Numerical failure, e.g. a kernel matrix that cannot be factorised.
class NumericalError : public Error {
  public:
    using Error::Error;
};

} // namespace nplmc
