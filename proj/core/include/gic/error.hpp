#pragma once

#include <stdexcept>
#include <string>

namespace gic {

// Base type for every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Tensor/operation dimension mismatches. Messages name the offending dimension.
class ShapeError : public Error {
public:
  using Error::Error;
};

// Invalid run configuration (bad values, unknown keys). CLI exit code 2.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Missing or malformed datasets, image folders, checkpoints. CLI exit code 3.
class DataError : public Error {
public:
  using Error::Error;
};

// Checkpoint version/checksum/layout violations.
class CheckpointError : public DataError {
public:
  using DataError::DataError;
};

// Non-finite loss encountered during training. CLI exit code 4.
class DivergenceError : public Error {
public:
  using Error::Error;
};

} // namespace gic
