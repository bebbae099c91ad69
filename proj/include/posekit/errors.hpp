#pragma once

#include <stdexcept>
#include <string>

namespace posekit {

// Bad configuration: unknown keys, inconsistent sizes, invalid topology.
// CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data: malformed annotation files, missing images, schema
// violations. CLI exit code 3.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure at runtime: non-finite loss, degenerate geometry where
// finite values are required. CLI exit code 4.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace posekit
