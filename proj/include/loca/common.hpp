#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace loca {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (unknown keys, out-of-range values, schema drift).
struct ConfigError : Error {
  using Error::Error;
};

// Array shape disagreement between caller and callee.
struct ShapeError : Error {
  using Error::Error;
};

// Non-finite value or domain violation during numerics.
struct NumericError : Error {
  using Error::Error;
};

// Dataset content problems (missing arrays, inconsistent sample counts).
struct DataError : Error {
  using Error::Error;
};

// Filesystem / serialization failures.
struct IoError : Error {
  using Error::Error;
};

// A metric that is undefined for the given sample (e.g. zero reference norm).
struct MetricUndefinedError : Error {
  using Error::Error;
};

// Internal invariant violation: indicates a bug, not a user error.
struct InvariantError : Error {
  using Error::Error;
};

inline void require(bool ok, const char* what) {
  if (!ok) throw InvariantError(what);
}

}  // namespace loca
