#pragma once

#include <stdexcept>
#include <string>

namespace tailseq {

// Error taxonomy mirrors the CLI exit codes: config errors exit 1,
// data errors exit 2, numeric/training errors exit 3.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tailseq
