// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cmbrl {

/// Invalid experiment or environment parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was called in a state where it is not allowed
/// (stepping a finished episode, backward on a non-scalar, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Arguments violate a precondition (shape mismatch, id out of range,
/// missing parent value).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cmbrl
