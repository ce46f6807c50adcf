#pragma once

#include <stdexcept>
#include <string>

namespace hemaclass {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto its exit-code taxonomy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or parameters (exit 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IngestError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class SplitError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ParameterError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// File, decode or inference failures (exit 3).
class IoError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public IoError {
 public:
  using IoError::IoError;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class SchemaError : public IoError {
 public:
  using IoError::IoError;
};

class InferenceError : public IoError {
 public:
  using IoError::IoError;
};

// Model fitting failed (exit 4).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Feature/model shape disagreement (exit 5).
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace hemaclass
