#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dcc/meanfield.hpp"
#include "dcc/scenario.hpp"

namespace dcc {

// A drawn finite population. Initial states and type indices come from
// separate substreams of the seed, so the first N agents of a larger draw
// coincide with the size-N draw (nested samples for convergence studies).
struct PopulationSample {
  std::uint64_t seed = 0;
  std::vector<Vector> initial_states;
  std::vector<int> type_indices;
  std::vector<int> type_counts;

  Vector empirical_mean;
  Matrix empirical_covariance;
  Scalar empirical_second_moment = 0.0;

  [[nodiscard]] int size() const { return static_cast<int>(initial_states.size()); }
  [[nodiscard]] PopulationSample prefix(int N) const;
};

PopulationSample sample_population(const Scenario& scenario, int N,
                                   std::uint64_t seed);

// One finite population playing the limiting strategies: each agent is
// classified by its basin, then closed-loop integrated with its (atom,
// destination) bundle. Costs are evaluated against the realized empirical
// mean, not the limit path; the limit path only shaped the controls.
struct PopulationRun {
  std::vector<int> type_indices;
  std::vector<int> choices;
  Vector fractions;
  VectorPath mean_path;             // realized x̂, arithmetic mean per node
  std::vector<Scalar> agent_costs;  // coupling + effort + best terminal
  Scalar total_cost = 0.0;          // sum of agent_costs in index order
  Scalar per_agent_cost = 0.0;
  std::vector<VectorPath> paths;    // filled only when keep_paths
  std::vector<VectorPath> controls; // filled only when keep_paths
};

// Paths are re-integrated instead of stored unless keep_paths is set, so
// large populations cost O(n) memory per agent.
PopulationRun simulate_decentralized(const PopulationSample& sample,
                                     const MeanFieldSolution& mf,
                                     const Scenario& scenario,
                                     const TimeGrid& grid,
                                     bool keep_paths = false);

// Social cost of a completed run: per-agent quadrature of
// q/2‖x_i − Z·x̂‖² + r_i/2‖u_i‖² plus min_j M_ij/2‖x_i(T) − p_j‖², and the
// total in the same summation order. Requires kept paths.
std::pair<Scalar, std::vector<Scalar>> social_cost(const PopulationRun& run,
                                                   const Scenario& scenario);

// ∫‖x̂(t) − x̄(t)‖²dt on the shared grid.
Scalar mean_path_residual(const PopulationRun& run, const MeanFieldSolution& mf);

// Split a stacked N·n path into per-agent paths (centralized solutions).
std::vector<VectorPath> split_stacked(const VectorPath& stacked, int N, int n);

struct GapRow {
  int N = 0;
  Scalar exact_per_agent = 0.0;
  Scalar decentralized_per_agent = 0.0;
  Scalar gap = 0.0;  // decentralized − exact; ≥ 0 up to integration error
  bool lower_bound_ok = true;  // gap ≥ −1e-6
};

// Exact optimum vs decentralized play on nested samples, one row per N.
// Every N must fit under the centralized enumeration cap.
std::vector<GapRow> convergence_experiment(const Scenario& scenario,
                                           const std::vector<int>& N_list,
                                           std::uint64_t seed);

}  // namespace dcc
