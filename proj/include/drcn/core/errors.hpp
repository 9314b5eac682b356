#pragma once

#include <stdexcept>
#include <string>

namespace drcn {

// Base class for every error raised by the library. Subclasses map onto the
// failure categories the CLI turns into exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// All positions of a masked softmax / pooling row are padding.
class DegenerateMaskError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

}  // namespace drcn
