#pragma once

#include <stdexcept>

namespace nai {

/// Invalid arguments or malformed input data.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inconsistent or out-of-range configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem and serialization failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values encountered in a numeric kernel.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace nai
