#pragma once

#include <stdexcept>
#include <string>

namespace bwe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (wrong rate, shape mismatch, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed container data (truncated WAV header, bad magic, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed data in an encoding this library does not handle.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration (unknown key, missing required path, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace bwe
