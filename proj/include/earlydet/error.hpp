#pragma once

#include <stdexcept>
#include <string>

namespace earlydet {

// Invalid configuration or dimension/layout mismatch.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data (non-finite values, negative distances, malformed files).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (e.g. out-of-order frames).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A required file or artifact does not exist.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace earlydet
