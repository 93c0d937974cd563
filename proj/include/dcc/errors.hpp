#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dcc {

// Exit codes used by the command line tool.  Library code throws the typed
// errors below; the tool maps them to these codes.
enum ExitCode : int {
  exit_ok = 0,
  exit_validation = 2,
  exit_no_convergence = 3,
  exit_cap_exceeded = 4,
};

// Scenario or input file rejected before any solve started.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// An ODE integration produced a non-finite value.  step_index names the grid
// interval where the blow-up was detected.
class IntegrationError : public std::runtime_error {
public:
  IntegrationError(const std::string& what, int step_index)
      : std::runtime_error(what), step_index(step_index) {}
  int step_index;
};

// Fixed-point iteration exhausted its budget.  Residual history is kept so
// callers can show whether the iteration was diverging or merely slow.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

// Work limit (e.g. assignment enumeration) would be exceeded.
class CapExceededError : public std::runtime_error {
public:
  explicit CapExceededError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace dcc
