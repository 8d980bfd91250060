#pragma once

#include <stdexcept>
#include <string>

namespace prp {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDepthError : public Error {
 public:
  using Error::Error;
};

class BehindCameraError : public Error {
 public:
  using Error::Error;
};

class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

/// File missing, unreadable, or malformed. The message names the offending frame when there is one.
class IoError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public IoError {
 public:
  using IoError::IoError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class EmptySceneError : public Error {
 public:
  using Error::Error;
};

class EstimationFailedError : public Error {
 public:
  using Error::Error;
};

class DegenerateConfigurationError : public EstimationFailedError {
 public:
  using EstimationFailedError::EstimationFailedError;
};

class TooSmallError : public Error {
 public:
  using Error::Error;
};

}  // namespace prp
