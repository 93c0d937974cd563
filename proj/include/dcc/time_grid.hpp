#pragma once

#include <cmath>
#include <string>

#include "dcc/errors.hpp"
#include "dcc/types.hpp"

namespace dcc {

// Uniform grid on [0, horizon] with `steps` intervals, steps+1 nodes.
// time(steps) returns horizon exactly; interior nodes are k*dt.
struct TimeGrid {
  Scalar horizon = 1.0;
  int steps = 1000;

  TimeGrid() = default;
  TimeGrid(Scalar horizon, int steps) : horizon(horizon), steps(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      throw ValidationError("time grid: horizon must be finite and positive");
    if (steps < 1)
      throw ValidationError("time grid: steps must be >= 1");
  }

  [[nodiscard]] int size() const { return steps + 1; }
  [[nodiscard]] Scalar dt() const { return horizon / steps; }
  [[nodiscard]] Scalar time(int k) const {
    return k == steps ? horizon : k * dt();
  }

  bool operator==(const TimeGrid& other) const {
    return horizon == other.horizon && steps == other.steps;
  }
};

} // namespace dcc
