#pragma once

#include <stdexcept>
#include <string>

namespace nhcrop {

// Exit codes of the command-line tool map onto these three families.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nhcrop
