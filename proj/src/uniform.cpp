#include "dcc/uniform.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "dcc/errors.hpp"
#include "dcc/integrate.hpp"

namespace dcc {

namespace {

// Path value R1(t)·mu0 + R2(t)·p_lambda on the basis grid.
VectorPath assemble_mean(const UniformPathBasis& basis, const Vector& p_lambda) {
  const TimeGrid& grid = basis.R1.grid;
  std::vector<Vector> values(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    values[k] = basis.R1[k] * basis.mu0 + basis.R2[k] * p_lambda;
  }
  return VectorPath(grid, std::move(values));
}

Vector weighted_target(const Scenario& scenario, const Vector& lambda) {
  Vector p = Vector::Zero(scenario.state_dim);
  for (int j = 0; j < scenario.num_destinations; ++j) {
    p += lambda(j) * scenario.destinations[j];
  }
  return p;
}

void check_lambda(const Scenario& scenario, const Vector& lambda) {
  if (lambda.size() != scenario.num_destinations) {
    throw ValidationError("lambda must have one entry per destination");
  }
  Scalar sum = 0.0;
  for (int j = 0; j < lambda.size(); ++j) {
    if (!std::isfinite(lambda(j)) || lambda(j) < -1e-9 || lambda(j) > 1.0 + 1e-9) {
      throw ValidationError("lambda entries must lie in [0, 1]");
    }
    sum += lambda(j);
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("lambda entries must sum to 1");
  }
}

// Fixed point of one affine basis column: x = H·x0_part + forced(beta[x]),
// where beta solves the offset equation with terminal weight M toward
// `target` and forcing F·x. Damped Picard, same semantics as the generic
// solver (damping promoted to 1 when q = 0, where the map is constant).
VectorPath solve_basis_column(const AgentType& atom, const CouplingSpec& coupling,
                              const MatrixPath& homogeneous, const MatrixPath& gamma,
                              const Vector& x0_part, const Vector& target,
                              const TimeGrid& grid, Scalar tol, int max_iter,
                              Scalar damping, int& iterations_out) {
  AgentType column_atom = atom;
  column_atom.terminal_weights = Vector::Constant(1, atom.terminal_weights(0));
  const std::vector<Vector> column_dest = {target};

  const Scalar alpha = coupling.q == 0.0 ? 1.0 : damping;

  std::vector<Vector> start(grid.size());
  for (int k = 0; k < grid.size(); ++k) start[k] = homogeneous[k] * x0_part;
  VectorPath x(grid, std::move(start));

  std::vector<Scalar> history;
  int updates = 0;
  for (;;) {
    const OffsetPair offset =
        solve_offset(column_atom, 0, gamma, x, coupling, column_dest, grid);
    const VectorPath forced = closed_loop_forced(column_atom, gamma, offset.beta, grid);
    std::vector<Vector> mapped(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
      mapped[k] = homogeneous[k] * x0_part + forced[k];
    }
    VectorPath g(grid, std::move(mapped));

    const Scalar residual = sup_distance(g, x);
    history.push_back(residual);
    if (residual <= tol) {
      iterations_out = updates;
      return x;
    }
    if (updates >= max_iter) {
      throw ConvergenceError("basis column iteration did not reach tolerance " +
                                 std::to_string(tol),
                             history);
    }
    for (int k = 0; k < grid.size(); ++k) {
      x.values[k] = (1.0 - alpha) * x.values[k] + alpha * g[k];
    }
    ++updates;
  }
}

}  // namespace

bool uniform_fast_path_eligible(const Scenario& scenario) {
  if (scenario.atoms.size() != 1 || scenario.num_destinations != 2) return false;
  const Vector& M = scenario.atoms[0].terminal_weights;
  return M(0) == M(1);
}

UniformPathBasis solve_path_basis(const Scenario& scenario) {
  scenario.validate();
  if (!uniform_fast_path_eligible(scenario)) {
    throw ValidationError(
        "path basis requires a single type, two destinations, and equal "
        "terminal weights; use the generic fixed point solver instead");
  }
  const TimeGrid grid = scenario.grid();
  const AgentType& atom = scenario.atoms[0];
  const int n = scenario.state_dim;

  UniformPathBasis basis;
  basis.mu0 = scenario.initial.mean_vector();
  basis.gamma = solve_gamma(atom, 0, scenario.coupling.q, grid);
  basis.homogeneous = closed_loop_homogeneous(atom, basis.gamma, grid);

  // Solving each column to tol/scale makes the assembled mean path accurate
  // to solver.tol for any lambda on the simplex.
  Scalar scale = basis.mu0.cwiseAbs().sum();
  for (const Vector& p : scenario.destinations) {
    scale = std::max(scale, p.cwiseAbs().sum());
  }
  const Scalar column_tol = scenario.solver.tol / std::max(1.0, scale);

  std::vector<MatrixPath> columns;  // R1 columns then R2 columns
  columns.reserve(2);
  basis.iterations = 0;

  std::vector<Matrix> r1(grid.size(), Matrix::Zero(n, n));
  std::vector<Matrix> r2(grid.size(), Matrix::Zero(n, n));
  const Vector zero = Vector::Zero(n);
  for (int c = 0; c < n; ++c) {
    const Vector e = Vector::Unit(n, c);
    int iters = 0;
    const VectorPath col1 = solve_basis_column(
        atom, scenario.coupling, basis.homogeneous, basis.gamma, e, zero, grid,
        column_tol, scenario.solver.max_iter, scenario.solver.damping, iters);
    basis.iterations = std::max(basis.iterations, iters);
    const VectorPath col2 = solve_basis_column(
        atom, scenario.coupling, basis.homogeneous, basis.gamma, zero, e, grid,
        column_tol, scenario.solver.max_iter, scenario.solver.damping, iters);
    basis.iterations = std::max(basis.iterations, iters);
    for (int k = 0; k < grid.size(); ++k) {
      r1[k].col(c) = col1[k];
      r2[k].col(c) = col2[k];
    }
  }
  basis.R1 = MatrixPath(grid, std::move(r1));
  basis.R2 = MatrixPath(grid, std::move(r2));
  return basis;
}

HalfspaceSplit halfspace_split(const Scenario& scenario,
                               const UniformPathBasis& basis,
                               const Vector& lambda) {
  check_lambda(scenario, lambda);
  const TimeGrid& grid = basis.R1.grid;
  const AgentType& atom = scenario.atoms[0];
  const VectorPath xbar = assemble_mean(basis, weighted_target(scenario, lambda));

  const OffsetPair o0 = solve_offset(atom, 0, basis.gamma, xbar, scenario.coupling,
                                     scenario.destinations, grid);
  const OffsetPair o1 = solve_offset(atom, 1, basis.gamma, xbar, scenario.coupling,
                                     scenario.destinations, grid);
  HalfspaceSplit split;
  split.a = o0.beta[0] - o1.beta[0];
  split.c = o1.delta[0] - o0.delta[0];
  return split;
}

Vector fraction_map(const Vector& lambda, const Scenario& scenario,
                    const UniformPathBasis& basis) {
  const HalfspaceSplit split = halfspace_split(scenario, basis, lambda);

  Scalar first = 0.0;
  if (scenario.initial.kind == InitialKind::gaussian) {
    const Scalar mean_proj = split.a.dot(scenario.initial.mean);
    const Scalar var = split.a.dot(scenario.initial.covariance * split.a);
    if (var <= 0.0) {
      first = mean_proj <= split.c ? 1.0 : 0.0;
    } else {
      // P(a'x <= c) for a'x ~ N(mean_proj, var).
      const Scalar z = (mean_proj - split.c) / std::sqrt(2.0 * var);
      first = 0.5 * std::erfc(z);
    }
  } else {
    const Scalar w = 1.0 / static_cast<Scalar>(scenario.initial.points.size());
    for (const Vector& x : scenario.initial.points) {
      if (split.a.dot(x) <= split.c) first += w;
    }
  }
  Vector out(2);
  out << first, 1.0 - first;
  return out;
}

LambdaSolution solve_lambda_bisection(const Scenario& scenario, Scalar tol) {
  if (!(tol > 0.0) || !std::isfinite(tol)) {
    throw ValidationError("bisection tolerance must be positive");
  }
  LambdaSolution sol;
  sol.basis = solve_path_basis(scenario);

  const auto g = [&](Scalar lam) {
    Vector lambda(2);
    lambda << lam, 1.0 - lam;
    return fraction_map(lambda, scenario, sol.basis)(0) - lam;
  };

  Scalar lo = 0.0, hi = 1.0;
  Scalar glo = g(lo), ghi = g(hi);
  std::vector<Scalar> history = {std::abs(glo), std::abs(ghi)};

  Scalar lam = std::abs(glo) <= std::abs(ghi) ? lo : hi;
  Scalar res = std::min(std::abs(glo), std::abs(ghi));
  sol.iterations = 0;

  // F maps the simplex into itself, so g(0) >= 0 >= g(1) always holds in
  // exact arithmetic; the flag records the paranoid case.
  sol.bracket_ok = glo >= 0.0 && ghi <= 0.0;
  if (sol.bracket_ok && res > tol) {
    for (int it = 0; it < 60; ++it) {
      const Scalar mid = 0.5 * (lo + hi);
      const Scalar gm = g(mid);
      ++sol.iterations;
      history.push_back(std::abs(gm));
      if (std::abs(gm) < res) {
        res = std::abs(gm);
        lam = mid;
      }
      if (std::abs(gm) <= tol) break;
      if (gm > 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
      // Point-mass initial laws make F a step function; the crossing can sit
      // between steps, in which case the bracket collapses without |g| ever
      // meeting tol. The midpoint then locates the jump to machine precision.
      if (hi - lo <= 1e-13) break;
    }
  }
  if (res > tol && hi - lo > 1e-13) {
    throw ConvergenceError("bisection residual " + std::to_string(res) +
                               " above tolerance " + std::to_string(tol),
                           history);
  }

  sol.residual = res;
  sol.lambda = Vector(2);
  sol.lambda << lam, 1.0 - lam;
  sol.xbar = assemble_mean(sol.basis, weighted_target(scenario, sol.lambda));
  return sol;
}

MeanFieldSolution solution_from_lambda(const Scenario& scenario,
                                       const LambdaSolution& lambda_solution) {
  const TimeGrid grid = scenario.grid();
  const AgentType& atom = scenario.atoms[0];
  const UniformPathBasis& basis = lambda_solution.basis;

  MeanFieldSolution sol;
  sol.xbar = lambda_solution.xbar;
  sol.measure = EmpiricalMeasure::from_initial(
      scenario.initial, scenario.solver.mc_samples, scenario.seed);

  sol.bundles.resize(1);
  sol.homogeneous.resize(1);
  for (int j = 0; j < 2; ++j) {
    OffsetPair offset = solve_offset(atom, j, basis.gamma, sol.xbar,
                                     scenario.coupling, scenario.destinations, grid);
    RiccatiBundle bundle;
    bundle.destination = j;
    bundle.A = atom.A;
    bundle.B = atom.B;
    bundle.r = atom.r;
    bundle.terminal_weight = atom.terminal_weights(j);
    bundle.target = scenario.destinations[j];
    bundle.gamma = basis.gamma;
    bundle.beta = std::move(offset.beta);
    bundle.delta = std::move(offset.delta);
    sol.bundles[0].push_back(std::move(bundle));
    sol.homogeneous[0].push_back(basis.homogeneous);
  }
  sol.classifier = compute_basins(sol.bundles);

  sol.fractions = Vector::Zero(2);
  for (std::size_t s = 0; s < sol.measure.points.size(); ++s) {
    sol.fractions(sol.classifier.classify(0, sol.measure.points[s])) +=
        sol.measure.weights[s];
  }

  const VectorPath g = apply_G(sol.xbar, scenario, sol.measure, grid);
  sol.residual = sup_distance(g, sol.xbar);
  sol.iterations = lambda_solution.iterations;
  sol.residual_history = {sol.residual};
  return sol;
}

}  // namespace dcc
