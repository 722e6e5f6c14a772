#pragma once

#include <stdexcept>
#include <string>

namespace rbcv {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid distribution, family or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Linear solver failure or residual check failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Diffusion tensor at or below the ellipticity floor.
class DegenerateCoefficientError : public Error {
 public:
  DegenerateCoefficientError(const std::string& what, double mu, double z1,
                             double z2, double x, double y)
      : Error(what), mu(mu), z1(z1), z2(z2), x(x), y(y) {}
  double mu, z1, z2, x, y;
};

/// Covariance matrix of a basis is numerically singular on a batch.
class DegenerateBasisError : public Error {
 public:
  using Error::Error;
};

/// A new snapshot is (numerically) inside the span of the current basis.
class DegenerateSnapshotError : public Error {
 public:
  using Error::Error;
};

/// theta^2 vanishes where the acceptance ratio must be evaluated.
class DegenerateRatioError : public Error {
 public:
  using Error::Error;
};

}  // namespace rbcv
