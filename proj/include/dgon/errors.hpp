#pragma once

#include <stdexcept>
#include <string>

namespace dgon {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or feature shapes that do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API precondition (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during integration, training or rollout.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A query or parameter outside its admissible domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid graph structure, including disconnected subgraphs.
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Malformed or invalid input data (CSV cells, ragged rows, short series).
class DataError : public Error {
 public:
  using Error::Error;
};

/// File system failures.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or version-mismatched binary files.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Weights and configuration disagree (variant, sensor count, ...).
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace dgon
