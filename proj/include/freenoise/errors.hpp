#pragma once

#include <stdexcept>
#include <string>

namespace freenoise {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Array extents do not match what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates a documented constraint.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Index outside a valid range (e.g. a timestep not in the schedule).
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied input is unusable (empty prompt, too few frames, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// On-disk data does not match the expected file format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// The model produced something it never should (non-finite activations).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Benchmarking cannot produce trustworthy numbers.
class BenchError : public Error {
 public:
  using Error::Error;
};

}  // namespace freenoise
