#include "dcc/centralized.hpp"

#include <Eigen/LU>
#include <limits>
#include <map>
#include <string>

#include "dcc/errors.hpp"
#include "dcc/integrate.hpp"

namespace dcc {

namespace {

void check_agents(const Scenario& scenario, const std::vector<Agent>& agents) {
  if (agents.empty()) throw ValidationError("agents: empty list");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (agents[i].atom < 0 ||
        agents[i].atom >= static_cast<int>(scenario.atoms.size()))
      throw ValidationError("agents[" + std::to_string(i) +
                            "].atom: index out of range");
    if (agents[i].x0.size() != scenario.state_dim || !agents[i].x0.allFinite())
      throw ValidationError("agents[" + std::to_string(i) +
                            "].x0: expected finite vector of length " +
                            std::to_string(scenario.state_dim));
  }
}

// Per-agent terminal weights M_{i,d_i}; Γ̃ depends on d only through these.
std::vector<Scalar> terminal_weight_key(const Scenario& scenario,
                                        const std::vector<Agent>& agents,
                                        const Assignment& d) {
  std::vector<Scalar> key(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i)
    key[i] = scenario.atoms[agents[i].atom].terminal_weights(d[i]);
  return key;
}

MatrixPath solve_stacked_gamma(const StackedSystem& sys,
                               const std::vector<Scalar>& weights,
                               const TimeGrid& grid) {
  const int dim = sys.N * sys.n;
  Matrix terminal = Matrix::Zero(dim, dim);
  for (int i = 0; i < sys.N; ++i)
    terminal.block(i * sys.n, i * sys.n, sys.n, sys.n) =
        weights[i] * Matrix::Identity(sys.n, sys.n);

  const Matrix At = sys.Atilde.transpose();
  auto rhs = [&](Scalar, const Matrix& G) -> Matrix {
    return G * sys.BRBt * G - G * sys.Atilde - At * G - sys.Qtilde;
  };
  auto symmetrize = [](Matrix& G) { G = 0.5 * (G + G.transpose()).eval(); };
  return integrate_backward_projected(rhs, terminal, grid, symmetrize);
}

void check_assignment(const Scenario& scenario, int N, const Assignment& d) {
  if (static_cast<int>(d.size()) != N)
    throw ValidationError("assignment: expected " + std::to_string(N) +
                          " entries");
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] < 0 || d[i] >= scenario.num_destinations)
      throw ValidationError("assignment[" + std::to_string(i) +
                            "]: destination index out of range");
}

// Offset/scalar backward solve and cost once Γ̃ is known.
AssignmentSolution solve_offsets_for(const StackedSystem& sys,
                                     const Scenario& scenario,
                                     const std::vector<Agent>& agents,
                                     const Assignment& d, MatrixPath gamma,
                                     const TimeGrid& grid) {
  const int dim = sys.N * sys.n;
  const std::vector<Scalar> weights = terminal_weight_key(scenario, agents, d);

  Vector yT(dim + 1);
  Scalar delta_T = 0.0;
  for (int i = 0; i < sys.N; ++i) {
    const Vector& target = scenario.destinations[d[i]];
    yT.segment(i * sys.n, sys.n) = -weights[i] * target;
    delta_T += 0.5 * weights[i] * target.squaredNorm();
  }
  yT(dim) = delta_T;

  AssignmentSolution sol;
  sol.gamma = std::move(gamma);
  // β̃̇ = (Γ̃B̃R̃⁻¹B̃ᵀ − Ãᵀ)β̃, δ̃̇ = ½β̃ᵀB̃R̃⁻¹B̃ᵀβ̃ in one joint state.
  const Matrix At = sys.Atilde.transpose();
  auto rhs = [&](Scalar t, const Vector& y) -> Vector {
    const Vector beta = y.head(dim);
    Vector dy(dim + 1);
    dy.head(dim) = sol.gamma.at(t) * (sys.BRBt * beta) - At * beta;
    dy(dim) = 0.5 * beta.dot(sys.BRBt * beta);
    return dy;
  };
  VectorPath joint = integrate_backward(rhs, yT, grid);
  std::vector<Vector> betas(grid.size());
  std::vector<Scalar> deltas(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    betas[k] = joint[k].head(dim);
    deltas[k] = joint[k](dim);
  }
  sol.beta = VectorPath(grid, std::move(betas));
  sol.delta = ScalarPath(grid, std::move(deltas));
  sol.cost = 0.5 * sys.x0.dot(sol.gamma[0] * sys.x0) + sol.beta[0].dot(sys.x0) +
             sol.delta[0];
  return sol;
}

} // namespace

StackedSystem assemble(const Scenario& scenario,
                       const std::vector<Agent>& agents) {
  check_agents(scenario, agents);
  StackedSystem sys;
  sys.N = static_cast<int>(agents.size());
  sys.n = scenario.state_dim;
  sys.m = scenario.control_dim;
  const int dim = sys.N * sys.n;

  sys.Atilde = Matrix::Zero(dim, dim);
  sys.Btilde = Matrix::Zero(dim, sys.N * sys.m);
  sys.BRBt = Matrix::Zero(dim, dim);
  sys.Rdiag = Vector(sys.N * sys.m);
  sys.x0 = Vector(dim);
  for (int i = 0; i < sys.N; ++i) {
    const AgentType& atom = scenario.atoms[agents[i].atom];
    sys.Atilde.block(i * sys.n, i * sys.n, sys.n, sys.n) = atom.A;
    sys.Btilde.block(i * sys.n, i * sys.m, sys.n, sys.m) = atom.B;
    sys.BRBt.block(i * sys.n, i * sys.n, sys.n, sys.n) =
        atom.B * atom.B.transpose() / atom.r;
    sys.Rdiag.segment(i * sys.m, sys.m).setConstant(atom.r);
    sys.x0.segment(i * sys.n, sys.n) = agents[i].x0;
  }

  const Matrix L = scenario.coupling.mean_coupling();
  const Scalar q = scenario.coupling.q;
  sys.Qtilde = q * Matrix::Identity(dim, dim);
  for (int i = 0; i < sys.N; ++i)
    for (int k = 0; k < sys.N; ++k)
      sys.Qtilde.block(i * sys.n, k * sys.n, sys.n, sys.n) += (q / sys.N) * L;
  return sys;
}

AssignmentSolution solve_assignment(const StackedSystem& sys,
                                    const Scenario& scenario,
                                    const std::vector<Agent>& agents,
                                    const Assignment& d) {
  check_assignment(scenario, sys.N, d);
  const TimeGrid grid = scenario.grid();
  MatrixPath gamma =
      solve_stacked_gamma(sys, terminal_weight_key(scenario, agents, d), grid);
  return solve_offsets_for(sys, scenario, agents, d, std::move(gamma), grid);
}

VectorPath stacked_trajectory(const StackedSystem& sys,
                              const AssignmentSolution& sol,
                              const TimeGrid& grid) {
  auto rhs = [&](Scalar t, const Vector& x) -> Vector {
    return sys.Atilde * x - sys.BRBt * (sol.gamma.at(t) * x + sol.beta.at(t));
  };
  return integrate_forward(rhs, sys.x0, grid);
}

VectorPath stacked_controls(const StackedSystem& sys,
                            const AssignmentSolution& sol,
                            const VectorPath& states) {
  std::vector<Vector> controls(states.grid.size());
  for (int k = 0; k < states.grid.size(); ++k) {
    Vector u = -sys.Btilde.transpose() * (sol.gamma[k] * states[k] + sol.beta[k]);
    u.array() /= sys.Rdiag.array();
    controls[k] = u;
  }
  return VectorPath(states.grid, std::move(controls));
}

CentralizedSolution exact_social_optimum(const Scenario& scenario,
                                         const std::vector<Agent>& agents,
                                         bool keep_cost_table) {
  check_agents(scenario, agents);
  const int N = static_cast<int>(agents.size());
  const int l = scenario.num_destinations;

  long long total = 1;
  for (int i = 0; i < N; ++i) {
    total *= l;
    if (total > scenario.solver.enumeration_cap)
      throw CapExceededError(
          "assignment enumeration needs more than " +
          std::to_string(scenario.solver.enumeration_cap) +
          " solves (cap); raise solver.enumeration_cap or use the "
          "mean-field solver for large populations");
  }

  const StackedSystem sys = assemble(scenario, agents);
  const TimeGrid grid = scenario.grid();
  std::map<std::vector<Scalar>, MatrixPath> gamma_cache;

  CentralizedSolution best;
  bool have_best = false;
  Assignment d(N, 0);
  for (long long index = 0; index < total; ++index) {
    // Lexicographic enumeration: the last agent's destination moves fastest,
    // so the first strict minimum is the lexicographically smallest argmin.
    long long rem = index;
    for (int i = N - 1; i >= 0; --i) {
      d[i] = static_cast<int>(rem % l);
      rem /= l;
    }

    const std::vector<Scalar> key = terminal_weight_key(scenario, agents, d);
    auto it = gamma_cache.find(key);
    if (it == gamma_cache.end())
      it = gamma_cache.emplace(key, solve_stacked_gamma(sys, key, grid)).first;

    AssignmentSolution sol =
        solve_offsets_for(sys, scenario, agents, d, it->second, grid);
    if (keep_cost_table) best.cost_table.emplace_back(d, sol.cost);
    if (!have_best || sol.cost < best.cost) {
      have_best = true;
      best.assignment = d;
      best.cost = sol.cost;
      best.gamma = std::move(sol.gamma);
      best.beta = std::move(sol.beta);
      best.delta = std::move(sol.delta);
    }
  }

  AssignmentSolution chosen{best.cost, best.gamma, best.beta, best.delta};
  best.trajectory = stacked_trajectory(sys, chosen, grid);
  best.control = stacked_controls(sys, chosen, best.trajectory);
  return best;
}

ReachabilityReport reachability_probe(const Scenario& scenario,
                                      const std::vector<Agent>& agents,
                                      Scalar epsilon,
                                      const std::vector<Scalar>& M_schedule) {
  check_agents(scenario, agents);
  const int n = scenario.state_dim;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const AgentType& atom = scenario.atoms[agents[i].atom];
    const int m = static_cast<int>(atom.B.cols());
    Matrix ctrb(n, n * m);
    Matrix power = Matrix::Identity(n, n);
    for (int k = 0; k < n; ++k) {
      ctrb.block(0, k * m, n, m) = power * atom.B;
      power = atom.A * power;
    }
    if (Eigen::FullPivLU<Matrix>(ctrb).rank() < n)
      throw ValidationError("agents[" + std::to_string(i) +
                            "]: (A,B) is not controllable; terminal "
                            "reachability requires a controllable pair");
  }

  ReachabilityReport report;
  report.epsilon = epsilon;
  for (Scalar M : M_schedule) {
    Scenario probe = scenario;
    for (AgentType& atom : probe.atoms) atom.terminal_weights.setConstant(M);
    CentralizedSolution sol = exact_social_optimum(probe, agents);
    const Vector xT = sol.trajectory.back();
    Scalar worst = 0.0;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const Vector xi = xT.segment(static_cast<int>(i) * n, n);
      Scalar nearest = std::numeric_limits<Scalar>::infinity();
      for (const Vector& p : probe.destinations)
        nearest = std::min(nearest, (xi - p).norm());
      worst = std::max(worst, nearest);
    }
    report.weights.push_back(M);
    report.max_distance.push_back(worst);
    if (report.first_within < 0 && worst <= epsilon)
      report.first_within = static_cast<int>(report.weights.size()) - 1;
  }
  return report;
}

} // namespace dcc
