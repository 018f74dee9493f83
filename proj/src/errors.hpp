#pragma once

#include <stdexcept>
#include <string>

namespace metaid {

// Bad configuration or misuse of an interface. Maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed, insufficient, or inconsistent input data. Maps to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace metaid
