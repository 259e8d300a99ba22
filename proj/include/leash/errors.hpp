#pragma once

#include <stdexcept>
#include <string>

namespace leash {

/// Invalid hyperparameters or a malformed config file.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Logit vector or signal record that violates its domain invariants.
class MalformedInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller broke the streaming protocol (out-of-order step, feed after halt,
/// trend queried before enough history exists).
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace leash
