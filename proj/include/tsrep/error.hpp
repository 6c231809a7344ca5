#pragma once

#include <stdexcept>
#include <string>

namespace tsrep {

/// Base of every error raised by the library. The CLI maps any of these to a
/// nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not line up with what an operation expects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Hyperparameter or argument outside its documented range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// API misuse: wrong call order, empty batches, key mismatches.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input dataset.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// A series or split too short for the requested windows.
class SizingError : public Error {
 public:
  using Error::Error;
};

/// Singular or ill-posed linear system.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, truncated or version-mismatched checkpoint.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsrep
