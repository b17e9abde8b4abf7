#pragma once

#include <stdexcept>
#include <string>

namespace gait {

/// Base of every error raised by the library. `exit_code()` is what `gaitctl`
/// returns when the error escapes a subcommand.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Invalid configuration, unsupported option combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Malformed or missing input data (files, keypoints, labels, shapes).
class InputError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Tensor shape mismatch; the message names the offending axes.
class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

/// Non-finite values or numerically degenerate results.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// A fused descriptor whose norm vanished, e.g. the mean of antipodal features.
class DegenerateDescriptorError : public NumericError {
 public:
  using NumericError::NumericError;
};

class UnsupportedArchitectureError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace gait
