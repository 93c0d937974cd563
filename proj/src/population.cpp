#include "dcc/population.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "dcc/centralized.hpp"
#include "dcc/errors.hpp"
#include "dcc/rng.hpp"

namespace dcc {

namespace {

// Stage data for the closed loop ẋ = (A − (1/r)BBᵀΓ)x − (1/r)BBᵀβ tabulated
// at nodes and interval midpoints, so the per-agent RK4 sweep is plain
// matrix-vector work with no interpolation in the inner loop. Node-wise
// feedback u = Kfb·x + kfb comes along for the cost evaluation.
struct ClosedLoopTable {
  std::vector<Matrix> Acl;  // index 2k = node k, 2k+1 = midpoint of [k, k+1]
  std::vector<Vector> f;
  std::vector<Matrix> Kfb;  // nodes only
  std::vector<Vector> kfb;
};

ClosedLoopTable build_table(const RiccatiBundle& bundle, const TimeGrid& grid) {
  const Matrix S = bundle.B * bundle.B.transpose() / bundle.r;
  const Matrix Bt_over_r = bundle.B.transpose() / bundle.r;
  const int K = grid.steps;

  ClosedLoopTable table;
  table.Acl.resize(2 * K + 1);
  table.f.resize(2 * K + 1);
  table.Kfb.resize(K + 1);
  table.kfb.resize(K + 1);
  for (int k = 0; k <= K; ++k) {
    const Scalar t = grid.time(k);
    const Matrix gamma_k = bundle.gamma.at(t);
    const Vector beta_k = bundle.beta.at(t);
    table.Acl[2 * k] = bundle.A - S * gamma_k;
    table.f[2 * k] = -(S * beta_k);
    table.Kfb[k] = -(Bt_over_r * gamma_k);
    table.kfb[k] = -(Bt_over_r * beta_k);
    if (k < K) {
      const Scalar tm = 0.5 * (t + grid.time(k + 1));
      table.Acl[2 * k + 1] = bundle.A - S * bundle.gamma.at(tm);
      table.f[2 * k + 1] = -(S * bundle.beta.at(tm));
    }
  }
  return table;
}

// RK4 sweep over the tabulated closed loop; visit(k, x_k) fires per node.
template <class Visit>
void run_closed_loop(const ClosedLoopTable& table, const TimeGrid& grid,
                     const Vector& x0, Visit&& visit) {
  Vector x = x0;
  visit(0, x);
  for (int k = 0; k < grid.steps; ++k) {
    const Scalar h = grid.time(k + 1) - grid.time(k);
    const Vector k1 = table.Acl[2 * k] * x + table.f[2 * k];
    const Vector k2 =
        table.Acl[2 * k + 1] * (x + (0.5 * h) * k1) + table.f[2 * k + 1];
    const Vector k3 =
        table.Acl[2 * k + 1] * (x + (0.5 * h) * k2) + table.f[2 * k + 1];
    const Vector k4 = table.Acl[2 * k + 2] * (x + h * k3) + table.f[2 * k + 2];
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    visit(k + 1, x);
  }
  if (!x.allFinite()) {
    throw IntegrationError("closed-loop simulation produced a non-finite state",
                           grid.steps);
  }
}

Scalar best_terminal(const AgentType& atom, const std::vector<Vector>& dests,
                     const Vector& xT) {
  Scalar best = 0.5 * atom.terminal_weights(0) * (xT - dests[0]).squaredNorm();
  for (std::size_t j = 1; j < dests.size(); ++j) {
    const Scalar c =
        0.5 * atom.terminal_weights(static_cast<int>(j)) * (xT - dests[j]).squaredNorm();
    if (c < best) best = c;
  }
  return best;
}

// Trapezoid accumulator over grid nodes fed one value at a time.
struct Trapezoid {
  const TimeGrid* grid;
  Scalar sum = 0.0;
  Scalar prev = 0.0;

  void feed(int k, Scalar value) {
    if (k > 0) sum += 0.5 * (grid->time(k) - grid->time(k - 1)) * (prev + value);
    prev = value;
  }
};

}  // namespace

PopulationSample PopulationSample::prefix(int N) const {
  if (N < 1 || N > size()) {
    throw ValidationError("prefix size must lie in [1, N]");
  }
  PopulationSample out;
  out.seed = seed;
  out.initial_states.assign(initial_states.begin(), initial_states.begin() + N);
  out.type_indices.assign(type_indices.begin(), type_indices.begin() + N);
  out.type_counts.assign(type_counts.size(), 0);
  for (int i = 0; i < N; ++i) ++out.type_counts[out.type_indices[i]];

  const int n = static_cast<int>(out.initial_states[0].size());
  Vector mean = Vector::Zero(n);
  for (const Vector& x : out.initial_states) mean += x;
  mean /= static_cast<Scalar>(N);
  Matrix cov = Matrix::Zero(n, n);
  Scalar second = 0.0;
  for (const Vector& x : out.initial_states) {
    const Vector d = x - mean;
    cov += d * d.transpose();
    second += x.squaredNorm();
  }
  out.empirical_mean = mean;
  out.empirical_covariance = cov / static_cast<Scalar>(N);
  out.empirical_second_moment = second / static_cast<Scalar>(N);
  return out;
}

PopulationSample sample_population(const Scenario& scenario, int N,
                                   std::uint64_t seed) {
  scenario.validate();
  if (N < 1) throw ValidationError("population size must be at least 1");

  PopulationSample sample;
  sample.seed = seed;
  sample.initial_states.reserve(N);
  sample.type_indices.reserve(N);
  sample.type_counts.assign(scenario.atoms.size(), 0);

  Rng state_rng(derive_seed(seed, stream_initial_states));
  const int n = scenario.state_dim;
  if (scenario.initial.kind == InitialKind::gaussian) {
    const Matrix factor = covariance_factor(scenario.initial.covariance);
    for (int i = 0; i < N; ++i) {
      sample.initial_states.push_back(scenario.initial.mean +
                                      factor * state_rng.normal_vector(n));
    }
  } else {
    const auto count = static_cast<Scalar>(scenario.initial.points.size());
    for (int i = 0; i < N; ++i) {
      const int idx = std::min(static_cast<int>(count) - 1,
                               static_cast<int>(state_rng.uniform() * count));
      sample.initial_states.push_back(scenario.initial.points[idx]);
    }
  }

  Rng type_rng(derive_seed(seed, stream_type_indices));
  std::vector<Scalar> weights;
  weights.reserve(scenario.atoms.size());
  for (const AgentType& atom : scenario.atoms) weights.push_back(atom.weight);
  for (int i = 0; i < N; ++i) {
    const int a = type_rng.categorical(weights);
    sample.type_indices.push_back(a);
    ++sample.type_counts[a];
  }

  Vector mean = Vector::Zero(n);
  for (const Vector& x : sample.initial_states) mean += x;
  mean /= static_cast<Scalar>(N);
  Matrix cov = Matrix::Zero(n, n);
  Scalar second = 0.0;
  for (const Vector& x : sample.initial_states) {
    const Vector d = x - mean;
    cov += d * d.transpose();
    second += x.squaredNorm();
  }
  sample.empirical_mean = mean;
  sample.empirical_covariance = cov / static_cast<Scalar>(N);
  sample.empirical_second_moment = second / static_cast<Scalar>(N);
  return sample;
}

PopulationRun simulate_decentralized(const PopulationSample& sample,
                                     const MeanFieldSolution& mf,
                                     const Scenario& scenario,
                                     const TimeGrid& grid, bool keep_paths) {
  const int N = sample.size();
  if (N < 1) throw ValidationError("population sample is empty");
  if (mf.bundles.size() != scenario.atoms.size()) {
    throw ValidationError("mean-field solution does not match the scenario's types");
  }
  if (grid.horizon != mf.xbar.grid.horizon) {
    throw ValidationError("simulation grid horizon differs from the solved horizon");
  }
  for (int i = 0; i < N; ++i) {
    if (sample.type_indices[i] < 0 ||
        sample.type_indices[i] >= static_cast<int>(scenario.atoms.size())) {
      throw ValidationError("sample type index out of range");
    }
    if (sample.initial_states[i].size() != scenario.state_dim) {
      throw ValidationError("sample state dimension does not match the scenario");
    }
  }

  const int l = scenario.num_destinations;
  const int K = grid.steps;

  std::vector<std::vector<ClosedLoopTable>> tables(scenario.atoms.size());
  for (std::size_t a = 0; a < scenario.atoms.size(); ++a) {
    tables[a].reserve(l);
    for (int j = 0; j < l; ++j) tables[a].push_back(build_table(mf.bundles[a][j], grid));
  }

  PopulationRun run;
  run.type_indices = sample.type_indices;
  run.choices.resize(N);
  run.agent_costs.resize(N);
  run.fractions = Vector::Zero(l);
  if (keep_paths) {
    run.paths.reserve(N);
    run.controls.reserve(N);
  }

  // First sweep: choices and the realized mean path.
  std::vector<Vector> mean_acc(K + 1, Vector::Zero(scenario.state_dim));
  for (int i = 0; i < N; ++i) {
    const int a = sample.type_indices[i];
    const int j = mf.classifier.classify(a, sample.initial_states[i]);
    run.choices[i] = j;
    run.fractions(j) += 1.0;
    run_closed_loop(tables[a][j], grid, sample.initial_states[i],
                    [&](int k, const Vector& x) { mean_acc[k] += x; });
  }
  run.fractions /= static_cast<Scalar>(N);
  for (Vector& v : mean_acc) v /= static_cast<Scalar>(N);
  run.mean_path = VectorPath(grid, std::move(mean_acc));

  // Second sweep: costs against the realized mean. Re-running the identical
  // deterministic integration avoids storing every path.
  const Scalar q = scenario.coupling.q;
  std::vector<Vector> z_mean(K + 1);
  for (int k = 0; k <= K; ++k) z_mean[k] = scenario.coupling.Z * run.mean_path[k];

  run.total_cost = 0.0;
  for (int i = 0; i < N; ++i) {
    const int a = sample.type_indices[i];
    const int j = run.choices[i];
    const AgentType& atom = scenario.atoms[a];
    const ClosedLoopTable& table = tables[a][j];

    Trapezoid coupling{&grid};
    Trapezoid effort{&grid};
    Scalar terminal = 0.0;
    std::vector<Vector> states;
    std::vector<Vector> controls;
    if (keep_paths) {
      states.reserve(K + 1);
      controls.reserve(K + 1);
    }
    run_closed_loop(table, grid, sample.initial_states[i],
                    [&](int k, const Vector& x) {
                      const Vector u = table.Kfb[k] * x + table.kfb[k];
                      if (q != 0.0) coupling.feed(k, 0.5 * q * (x - z_mean[k]).squaredNorm());
                      effort.feed(k, 0.5 * atom.r * u.squaredNorm());
                      if (k == K) terminal = best_terminal(atom, scenario.destinations, x);
                      if (keep_paths) {
                        states.push_back(x);
                        controls.push_back(u);
                      }
                    });
    run.agent_costs[i] = coupling.sum + effort.sum + terminal;
    run.total_cost += run.agent_costs[i];
    if (keep_paths) {
      run.paths.emplace_back(grid, std::move(states));
      run.controls.emplace_back(grid, std::move(controls));
    }
  }
  run.per_agent_cost = run.total_cost / static_cast<Scalar>(N);
  return run;
}

std::pair<Scalar, std::vector<Scalar>> social_cost(const PopulationRun& run,
                                                   const Scenario& scenario) {
  const int N = static_cast<int>(run.type_indices.size());
  if (run.paths.size() != static_cast<std::size_t>(N) ||
      run.controls.size() != static_cast<std::size_t>(N)) {
    throw ValidationError("social cost evaluation needs a run with kept paths");
  }
  const TimeGrid& grid = run.mean_path.grid;
  const Scalar q = scenario.coupling.q;

  std::vector<Vector> z_mean(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    z_mean[k] = scenario.coupling.Z * run.mean_path[k];
  }

  std::vector<Scalar> per_agent(N);
  Scalar total = 0.0;
  for (int i = 0; i < N; ++i) {
    const AgentType& atom = scenario.atoms[run.type_indices[i]];
    Trapezoid coupling{&grid};
    Trapezoid effort{&grid};
    for (int k = 0; k < grid.size(); ++k) {
      if (q != 0.0) {
        coupling.feed(k, 0.5 * q * (run.paths[i][k] - z_mean[k]).squaredNorm());
      }
      effort.feed(k, 0.5 * atom.r * run.controls[i][k].squaredNorm());
    }
    const Scalar terminal =
        best_terminal(atom, scenario.destinations, run.paths[i].back());
    per_agent[i] = coupling.sum + effort.sum + terminal;
    total += per_agent[i];
  }
  return {total, std::move(per_agent)};
}

Scalar mean_path_residual(const PopulationRun& run, const MeanFieldSolution& mf) {
  if (!(run.mean_path.grid == mf.xbar.grid)) {
    throw ValidationError("run and mean-field solution live on different grids");
  }
  const TimeGrid& grid = run.mean_path.grid;
  Trapezoid acc{&grid};
  for (int k = 0; k < grid.size(); ++k) {
    acc.feed(k, (run.mean_path[k] - mf.xbar[k]).squaredNorm());
  }
  return acc.sum;
}

std::vector<VectorPath> split_stacked(const VectorPath& stacked, int N, int n) {
  if (stacked.values.empty() || stacked[0].size() != static_cast<long>(N) * n) {
    throw ValidationError("stacked path dimension is not N*n");
  }
  std::vector<VectorPath> out;
  out.reserve(N);
  for (int i = 0; i < N; ++i) {
    std::vector<Vector> values(stacked.values.size());
    for (std::size_t k = 0; k < stacked.values.size(); ++k) {
      values[k] = stacked.values[k].segment(static_cast<long>(i) * n, n);
    }
    out.emplace_back(stacked.grid, std::move(values));
  }
  return out;
}

std::vector<GapRow> convergence_experiment(const Scenario& scenario,
                                           const std::vector<int>& N_list,
                                           std::uint64_t seed) {
  if (N_list.empty()) throw ValidationError("N_list is empty");
  int max_n = 0;
  for (int N : N_list) {
    if (N < 1) throw ValidationError("population sizes must be at least 1");
    max_n = std::max(max_n, N);
  }

  const MeanFieldSolution mf = find_fixed_point(scenario);
  const PopulationSample full = sample_population(scenario, max_n, seed);
  const TimeGrid grid = scenario.grid();

  std::vector<GapRow> rows;
  rows.reserve(N_list.size());
  for (int N : N_list) {
    const PopulationSample sub = N == max_n ? full : full.prefix(N);
    std::vector<Agent> agents(N);
    for (int i = 0; i < N; ++i) {
      agents[i] = Agent{sub.type_indices[i], sub.initial_states[i]};
    }
    const CentralizedSolution exact = exact_social_optimum(scenario, agents);
    const PopulationRun run = simulate_decentralized(sub, mf, scenario, grid);

    GapRow row;
    row.N = N;
    row.exact_per_agent = exact.cost / static_cast<Scalar>(N);
    row.decentralized_per_agent = run.per_agent_cost;
    row.gap = row.decentralized_per_agent - row.exact_per_agent;
    row.lower_bound_ok = row.gap >= -1e-6;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dcc
