#pragma once

#include <stdexcept>
#include <string>

namespace fsic {

/// Invalid parameters or inconsistent inputs.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Interface geometry the patch subdivision cannot represent.
struct TopologyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Quantity that is undefined for the current state (e.g. a normalization by zero).
struct UndefinedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A time step could not be completed.
struct StepFailure : std::runtime_error {
  StepFailure(const std::string& what, double time) : std::runtime_error(what), t(time) {}
  double t;
};

}  // namespace fsic
