#pragma once

#include <stdexcept>
#include <string>

namespace unidial {

// File system and decoding failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Content that parses but violates a contract (bad manifest counts,
// mismatched metric inputs, invalid records where validity is required).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent caller-supplied configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace unidial
