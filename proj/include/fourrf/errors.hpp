#pragma once

#include <stdexcept>
#include <string>

namespace fourrf {

// bad user input: malformed scenario/layout/netlist files, unknown names
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// solver failure: non-convergence, singular system, step-control breakdown
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// request outside the model's validity: z <= 0, unstable equilibrium,
// sideband ratio >= 1, Mathieu instability when a stable answer is required
struct ModelDomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// trajectory left the sampling box; carries the exit time for reporting
struct EscapeError : NumericalError {
  EscapeError(const std::string& what, double t_exit_s)
      : NumericalError(what), exit_time(t_exit_s) {}
  double exit_time; // s
};

} // namespace fourrf
