// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace isac {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that cannot be combined.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (bad kernel size, unknown policy, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API misuse by the caller (index out of range, non-scalar loss, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Training cannot proceed (missing gradient, non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Data is numerically degenerate (all-zero window, zero truth).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// File read/write failure; message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Weight import rejected; message lists the offending tensors.
class ImportError : public Error {
 public:
  using Error::Error;
};

}  // namespace isac
