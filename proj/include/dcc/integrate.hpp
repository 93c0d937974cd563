#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dcc/path.hpp"

namespace dcc {

namespace detail {

// One classical RK4 step from (t, y) with signed step h.
template <class Value, class Rhs>
Value rk4_step(Rhs&& rhs, Scalar t, const Value& y, Scalar h) {
  const Value k1 = rhs(t, y);
  const Value k2 = rhs(t + 0.5 * h, Value(y + (0.5 * h) * k1));
  const Value k3 = rhs(t + 0.5 * h, Value(y + (0.5 * h) * k2));
  const Value k4 = rhs(t + h, Value(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace detail

// Fixed-step RK4 for dy/dt = rhs(t, y), y(0) = y0, sampled at every node.
template <class Value, class Rhs>
Path<Value> integrate_forward(Rhs&& rhs, const Value& y0, const TimeGrid& grid) {
  std::vector<Value> values;
  values.reserve(grid.size());
  values.push_back(y0);
  for (int k = 0; k < grid.steps; ++k) {
    const Scalar t = grid.time(k);
    const Scalar h = grid.time(k + 1) - t;
    values.push_back(detail::rk4_step(rhs, t, values.back(), h));
    if (!detail::value_finite(values.back()))
      throw IntegrationError("forward integration diverged at step " +
                                 std::to_string(k + 1),
                             k + 1);
  }
  return Path<Value>(grid, std::move(values));
}

// Same, marching from the terminal condition y(horizon) = yT down to 0.
// values[k] still corresponds to grid.time(k).
template <class Value, class Rhs>
Path<Value> integrate_backward(Rhs&& rhs, const Value& yT, const TimeGrid& grid) {
  std::vector<Value> values(grid.size(), yT);
  for (int k = grid.steps; k > 0; --k) {
    const Scalar t = grid.time(k);
    const Scalar h = grid.time(k - 1) - t;
    values[k - 1] = detail::rk4_step(rhs, t, values[k], h);
    if (!detail::value_finite(values[k - 1]))
      throw IntegrationError("backward integration diverged at step " +
                                 std::to_string(k - 1),
                             k - 1);
  }
  return Path<Value>(grid, std::move(values));
}

// Variant that applies a projection after every step (e.g. symmetrization of
// a Riccati matrix, which RK4 preserves only up to roundoff).
template <class Value, class Rhs, class Project>
Path<Value> integrate_backward_projected(Rhs&& rhs, const Value& yT,
                                         const TimeGrid& grid, Project&& project) {
  std::vector<Value> values(grid.size(), yT);
  project(values[grid.steps]);
  for (int k = grid.steps; k > 0; --k) {
    const Scalar t = grid.time(k);
    const Scalar h = grid.time(k - 1) - t;
    values[k - 1] = detail::rk4_step(rhs, t, values[k], h);
    project(values[k - 1]);
    if (!detail::value_finite(values[k - 1]))
      throw IntegrationError("backward integration diverged at step " +
                                 std::to_string(k - 1),
                             k - 1);
  }
  return Path<Value>(grid, std::move(values));
}

} // namespace dcc
