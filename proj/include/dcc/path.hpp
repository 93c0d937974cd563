#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dcc/errors.hpp"
#include "dcc/time_grid.hpp"
#include "dcc/types.hpp"

namespace dcc {

namespace detail {

inline bool value_finite(Scalar v) { return std::isfinite(v); }
template <class Derived>
bool value_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

inline Scalar value_sup_norm(Scalar v) { return std::abs(v); }
template <class Derived>
Scalar value_sup_norm(const Eigen::MatrixBase<Derived>& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

} // namespace detail

// Values sampled at the nodes of a TimeGrid.  Value is Scalar, Vector or
// Matrix; evaluation between nodes is linear, exact at the nodes.
template <class Value>
struct Path {
  TimeGrid grid;
  std::vector<Value> values;

  Path() = default;
  Path(TimeGrid grid, std::vector<Value> values)
      : grid(grid), values(std::move(values)) {
    if (static_cast<int>(this->values.size()) != grid.size())
      throw ValidationError("path: expected " + std::to_string(grid.size()) +
                            " samples, got " + std::to_string(this->values.size()));
  }

  static Path constant(const TimeGrid& grid, const Value& v) {
    return Path(grid, std::vector<Value>(grid.size(), v));
  }

  [[nodiscard]] const Value& operator[](int k) const { return values[k]; }
  [[nodiscard]] Value& operator[](int k) { return values[k]; }
  [[nodiscard]] const Value& front() const { return values.front(); }
  [[nodiscard]] const Value& back() const { return values.back(); }

  // Linear interpolation; t must lie in [0, horizon].
  [[nodiscard]] Value at(Scalar t) const {
    if (!(t >= 0.0 && t <= grid.horizon))
      throw ValidationError("path: evaluation time " + std::to_string(t) +
                            " outside [0, " + std::to_string(grid.horizon) + "]");
    if (t >= grid.horizon) return values.back();
    const Scalar dt = grid.dt();
    int k = static_cast<int>(std::floor(t / dt));
    if (k >= grid.steps) k = grid.steps - 1;
    const Scalar theta = (t - grid.time(k)) / (grid.time(k + 1) - grid.time(k));
    return (1.0 - theta) * values[k] + theta * values[k + 1];
  }

  [[nodiscard]] bool all_finite() const {
    for (const Value& v : values)
      if (!detail::value_finite(v)) return false;
    return true;
  }
};

using ScalarPath = Path<Scalar>;
using VectorPath = Path<Vector>;
using MatrixPath = Path<Matrix>;

// sup_k max-abs-entry distance between two paths on the same grid.
template <class Value>
Scalar sup_distance(const Path<Value>& a, const Path<Value>& b) {
  if (!(a.grid == b.grid))
    throw ValidationError("sup_distance: paths on different grids");
  Scalar d = 0.0;
  for (int k = 0; k < a.grid.size(); ++k)
    d = std::max(d, detail::value_sup_norm(a.values[k] - b.values[k]));
  return d;
}

// Trapezoid rule over the whole grid.
inline Scalar quadrature(const ScalarPath& f) {
  Scalar acc = 0.0;
  for (int k = 0; k < f.grid.steps; ++k) {
    const Scalar h = f.grid.time(k + 1) - f.grid.time(k);
    acc += 0.5 * h * (f.values[k] + f.values[k + 1]);
  }
  return acc;
}

// Trapezoid rule applied to g(t, f(t)) sampled at the nodes.
template <class Value, class Fn>
Scalar quadrature_map(const Path<Value>& f, Fn&& g) {
  Scalar acc = 0.0;
  Scalar prev = g(f.grid.time(0), f.values[0]);
  for (int k = 0; k < f.grid.steps; ++k) {
    const Scalar next = g(f.grid.time(k + 1), f.values[k + 1]);
    const Scalar h = f.grid.time(k + 1) - f.grid.time(k);
    acc += 0.5 * h * (prev + next);
    prev = next;
  }
  return acc;
}

} // namespace dcc
