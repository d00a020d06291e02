#pragma once

#include <stdexcept>
#include <string>

namespace nd {

// Error taxonomy maps onto process exit codes: ConfigError -> 1,
// DataError -> 2, NumericalError -> 3.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nd
