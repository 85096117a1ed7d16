#pragma once

#include <stdexcept>
#include <string>

namespace toporeg {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a documented precondition (negative weight, bad label, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Snapshot files are not contiguous in t.
class GapError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A snapshot file exists but holds no edges.
class EmptyGraphError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// API misuse: shape mismatch, non-scalar loss, repeated backward, ...
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Matrix inverse hit a pivot below the singularity threshold.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Embedding dimension smaller than the number of clusters.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Degenerate input for which a quantity is undefined (no edges, zero weight).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during training or in a tensor.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Filtration violates the face-before-coface ordering.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was asked to resume from artifacts that do not exist.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace toporeg
