#pragma once

#include <stdexcept>
#include <string>

namespace fmqkd {

// Base of every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A value outside its documented domain (negative loss, ratio outside (0,1), ...).
struct ParameterError : Error {
  using Error::Error;
};

// Visibility requested from a scan with no light in it.
struct UndefinedVisibility : Error {
  using Error::Error;
};

// Estimation requested on an empty key.
struct NoDataError : Error {
  using Error::Error;
};

// One-time pad ran out of key material.
struct KeyExhausted : Error {
  using Error::Error;
};

// Fringe fit without a usable fringe.
struct CalibrationFailed : Error {
  using Error::Error;
};

// Configuration text could not be parsed or violates an invariant.
struct ConfigError : Error {
  using Error::Error;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ParameterError(what);
}

}  // namespace fmqkd
