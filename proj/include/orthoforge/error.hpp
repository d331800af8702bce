#pragma once

#include <stdexcept>
#include <string>

namespace orthoforge {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

struct InvalidInput : std::runtime_error {
  explicit InvalidInput(const std::string& m) : std::runtime_error(m) {}
};

// Rational camera denominator vanished at the evaluation point.
struct DegenerateCamera : std::runtime_error {
  explicit DegenerateCamera(const std::string& m) : std::runtime_error(m) {}
};

struct IllConditioned : std::runtime_error {
  explicit IllConditioned(const std::string& m) : std::runtime_error(m) {}
};

struct NonConvergence : std::runtime_error {
  NonConvergence(const std::string& m, double last_residual_px)
      : std::runtime_error(m), last_residual(last_residual_px) {}
  double last_residual;  // pixels, state at the iteration cap
};

// Correlation input had zero variance: nothing to lock on to.
struct NoSignal : std::runtime_error {
  explicit NoSignal(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace orthoforge
