#pragma once

#include <stdexcept>
#include <string>

namespace eki {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Errors raised by linear/nonlinear solvers; the CLI maps these to exit code 3.
class SolverError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonSymmetric : public Error {
 public:
  using Error::Error;
};

class NotSpd : public SolverError {
 public:
  using SolverError::SolverError;
};

class SolveFailure : public SolverError {
 public:
  using SolverError::SolverError;
};

class LmStalled : public SolverError {
 public:
  using SolverError::SolverError;
};

class AlphaTooSmall : public Error {
 public:
  using Error::Error;
};

class TooFewModes : public Error {
 public:
  using Error::Error;
};

class BasisMismatch : public Error {
 public:
  using Error::Error;
};

class PointOutsideDomain : public Error {
 public:
  using Error::Error;
};

class EnsembleTooSmall : public Error {
 public:
  using Error::Error;
};

class NotLinearModel : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration; the CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace eki
