#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dcc/centralized.hpp"
#include "dcc/meanfield.hpp"
#include "dcc/population.hpp"
#include "dcc/scenario_io.hpp"

namespace dcc {

// Shortest exact decimal for a double; all emitted numbers go through this so
// outputs are byte-identical across runs.
std::string format_number(Scalar v);

std::string xbar_csv(const VectorPath& xbar);

// One row per (t, agent): t, agent, x1..xn, u1..um, choice.
std::string trajectories_csv(const std::vector<VectorPath>& states,
                             const std::vector<VectorPath>& controls,
                             const std::vector<int>& choices);

Json basins_json(const BasinClassifier& classifier);
Json lambda_json(const Vector& fractions, Scalar residual, int iterations,
                 const std::string& method);
Json cost_json(const Scenario& scenario, Scalar asymptotic_cost);
Json assumption_json(const AssumptionReport& report);
Json summary_json(const PopulationSample& sample, const PopulationRun& run,
                  Scalar residual_vs_limit);
Json exact_json(const CentralizedSolution& solution, int N);
std::string cost_table_csv(const CentralizedSolution& solution);

struct SweepRow {
  Scalar q = 0.0;
  std::string mode;
  Vector lambda;
  Scalar per_agent_cost = 0.0;
  Scalar asymptotic_cost = 0.0;
  Scalar residual = 0.0;
  int iterations = 0;
};
std::string sweep_csv(const std::vector<SweepRow>& rows);

std::string gap_csv(const std::vector<GapRow>& rows);

void write_file(const std::filesystem::path& path, const std::string& content);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace dcc
