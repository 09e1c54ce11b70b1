#pragma once

#include <stdexcept>
#include <string>

namespace depthpl {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration file or override.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data is missing or violates a precondition (empty cloud, bad depth).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the gradient tape (double backward, non-scalar root, ...).
class TapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace depthpl
