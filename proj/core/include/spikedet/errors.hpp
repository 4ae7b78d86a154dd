#pragma once

#include <stdexcept>
#include <string>

namespace spikedet {

/// Base class for all spikedet errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad indices, mismatched lengths, unparseable files.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A model violates its own invariants (non-stationary AR polynomial,
/// non-invertible MA polynomial, non-positive variance, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// The Kalman filter hit a numerically degenerate innovation variance.
class FilterError : public Error {
 public:
  using Error::Error;
};

/// Maximum-likelihood estimation collapsed to a zero innovation variance
/// (e.g. fitting a constant series).
class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

}  // namespace spikedet
