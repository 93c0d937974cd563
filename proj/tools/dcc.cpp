#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcc/centralized.hpp"
#include "dcc/errors.hpp"
#include "dcc/meanfield.hpp"
#include "dcc/population.hpp"
#include "dcc/report_io.hpp"
#include "dcc/scenario_io.hpp"
#include "dcc/uniform.hpp"

namespace fs = std::filesystem;
using namespace dcc;

namespace {

std::string default_out_dir() {
  if (const char* env = std::getenv("DCC_OUT_DIR")) return env;
  return "out";
}

std::vector<Agent> parse_agents_file(const std::string& path, const Scenario& scenario) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open agents file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("agents parse error in " + path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("agents") || !j["agents"].is_array() ||
      j["agents"].empty()) {
    throw ValidationError("agents file must contain a nonempty \"agents\" array");
  }
  std::vector<Agent> agents;
  for (const Json& ja : j["agents"]) {
    Agent a;
    a.atom = ja.value("atom", 0);
    if (a.atom < 0 || a.atom >= static_cast<int>(scenario.atoms.size())) {
      throw ValidationError("agent atom index out of range");
    }
    if (!ja.contains("x0") || !ja["x0"].is_array() ||
        static_cast<int>(ja["x0"].size()) != scenario.state_dim) {
      throw ValidationError("agent x0 must be an array of length n");
    }
    a.x0 = Vector(scenario.state_dim);
    for (int c = 0; c < scenario.state_dim; ++c) a.x0(c) = ja["x0"][c].get<Scalar>();
    agents.push_back(std::move(a));
  }
  return agents;
}

int run_check(const std::string& path, const fs::path& out) {
  const Scenario scenario = load_scenario(path);
  const AssumptionReport report = check_assumptions(scenario);

  std::cout << "k1 = " << format_number(report.k1) << "\n"
            << "k2 = " << format_number(report.k2) << "\n"
            << "k3 = " << format_number(report.k3) << "\n"
            << "horizon bound sqrt(max(k1+k2, k3))*T = "
            << format_number(report.horizon_bound)
            << (report.horizon_ok ? " < pi/2: contraction bound holds"
                                  : " >= pi/2: contraction bound NOT satisfied")
            << "\n";
  std::cout << "coupling eigenvalues:";
  for (long i = 0; i < report.coupling_eigenvalues.size(); ++i) {
    std::cout << " " << format_number(report.coupling_eigenvalues(i));
  }
  std::cout << "\n"
            << (report.coupling_ok ? "coupling matrix is positive semidefinite"
                                   : "coupling matrix is NOT positive semidefinite")
            << "\n"
            << "initial second moment = "
            << format_number(report.initial_second_moment) << "\n";
  write_json(out / "check.json", assumption_json(report));
  return exit_ok;
}

int run_solve_mf(const std::string& path, bool uniform, const fs::path& out) {
  const Scenario scenario = load_scenario(path);

  Vector fractions;
  Scalar residual = 0.0;
  int iterations = 0;
  std::string method;
  MeanFieldSolution sol;
  if (uniform) {
    if (!uniform_fast_path_eligible(scenario)) {
      throw ValidationError(
          "--uniform needs a single type, two destinations, and equal "
          "terminal weights");
    }
    const LambdaSolution ls = solve_lambda_bisection(scenario, scenario.solver.tol);
    sol = solution_from_lambda(scenario, ls);
    fractions = ls.lambda;
    residual = ls.residual;
    iterations = ls.iterations;
    method = "bisection";
  } else {
    sol = find_fixed_point(scenario);
    fractions = sol.fractions;
    residual = sol.residual;
    iterations = sol.iterations;
    method = "picard";
  }

  write_file(out / "xbar.csv", xbar_csv(sol.xbar));
  write_json(out / "basins.json", basins_json(sol.classifier));
  Json lj = lambda_json(fractions, residual, iterations, method);
  lj["mean_operator_residual"] = sol.residual;
  write_json(out / "lambda.json", lj);
  write_json(out / "cost.json", cost_json(scenario, asymptotic_social_cost(sol, scenario)));

  std::cout << "fractions:";
  for (long j = 0; j < fractions.size(); ++j) {
    std::cout << " " << format_number(fractions(j));
  }
  std::cout << "\nresidual " << format_number(residual) << " after " << iterations
            << " iterations (" << method << ")\n";
  return exit_ok;
}

int run_solve_exact(const std::string& path, const std::string& agents_path,
                    int sample_n, bool cost_table, const fs::path& out) {
  const Scenario scenario = load_scenario(path);

  std::vector<Agent> agents;
  if (!agents_path.empty()) {
    agents = parse_agents_file(agents_path, scenario);
  } else if (sample_n > 0) {
    const PopulationSample sample = sample_population(scenario, sample_n, scenario.seed);
    agents.resize(sample_n);
    for (int i = 0; i < sample_n; ++i) {
      agents[i] = Agent{sample.type_indices[i], sample.initial_states[i]};
    }
  } else {
    throw ValidationError("provide --agents FILE or -N COUNT");
  }

  const CentralizedSolution sol = exact_social_optimum(scenario, agents, cost_table);
  const int N = static_cast<int>(agents.size());

  write_json(out / "exact.json", exact_json(sol, N));
  write_file(out / "trajectories.csv",
             trajectories_csv(split_stacked(sol.trajectory, N, scenario.state_dim),
                              split_stacked(sol.control, N, scenario.control_dim),
                              sol.assignment));
  if (cost_table) write_file(out / "cost_table.csv", cost_table_csv(sol));

  std::cout << "assignment:";
  for (int d : sol.assignment) std::cout << " " << d;
  std::cout << "\ncost " << format_number(sol.cost) << " (per agent "
            << format_number(sol.cost / N) << ")\n";
  return exit_ok;
}

int run_simulate(const std::string& path, int N, std::uint64_t seed, bool seed_set,
                 bool no_paths, const fs::path& out) {
  const Scenario scenario = load_scenario(path);
  const std::uint64_t use_seed = seed_set ? seed : scenario.seed;

  const MeanFieldSolution mf = find_fixed_point(scenario);
  const PopulationSample sample = sample_population(scenario, N, use_seed);
  const bool keep = !no_paths && N <= 2000;
  const PopulationRun run =
      simulate_decentralized(sample, mf, scenario, scenario.grid(), keep);
  const Scalar residual = mean_path_residual(run, mf);

  if (keep) {
    write_file(out / "trajectories.csv",
               trajectories_csv(run.paths, run.controls, run.choices));
  }
  write_json(out / "summary.json", summary_json(sample, run, residual));

  std::cout << "fractions:";
  for (long j = 0; j < run.fractions.size(); ++j) {
    std::cout << " " << format_number(run.fractions(j));
  }
  std::cout << "\nper-agent cost " << format_number(run.per_agent_cost)
            << ", mean-path residual " << format_number(residual) << "\n";
  return exit_ok;
}

CouplingMode parse_mode(const std::string& name) {
  if (name == "coop" || name == "cooperative") return CouplingMode::cooperative;
  if (name == "noncoop" || name == "noncooperative") {
    return CouplingMode::noncooperative;
  }
  throw ValidationError("unknown mode: " + name);
}

int run_sweep(const std::string& path, const std::string& param,
              const std::vector<Scalar>& values, const std::vector<std::string>& modes,
              int N, const fs::path& out) {
  if (param != "q") throw ValidationError("only --param q is supported");
  if (values.empty()) throw ValidationError("--values list is empty");
  Scenario base = load_scenario(path);

  std::vector<SweepRow> rows;
  for (const Scalar q : values) {
    for (const std::string& mode_name : modes) {
      Scenario sc = base;
      sc.coupling.q = q;
      sc.coupling.mode = parse_mode(mode_name);

      SweepRow row;
      row.q = q;
      row.mode = sc.coupling.mode == CouplingMode::cooperative ? "cooperative"
                                                               : "noncooperative";
      MeanFieldSolution sol;
      if (uniform_fast_path_eligible(sc)) {
        const LambdaSolution ls = solve_lambda_bisection(sc, sc.solver.tol);
        sol = solution_from_lambda(sc, ls);
        row.lambda = ls.lambda;
        row.residual = ls.residual;
        row.iterations = ls.iterations;
      } else {
        sol = find_fixed_point(sc);
        row.lambda = sol.fractions;
        row.residual = sol.residual;
        row.iterations = sol.iterations;
      }
      row.asymptotic_cost = asymptotic_social_cost(sol, sc);

      const PopulationSample sample = sample_population(sc, N, sc.seed);
      const PopulationRun run = simulate_decentralized(sample, sol, sc, sc.grid());
      row.per_agent_cost = run.per_agent_cost;
      rows.push_back(std::move(row));

      std::cout << "q=" << format_number(q) << " " << rows.back().mode << " lambda=(";
      for (long j = 0; j < rows.back().lambda.size(); ++j) {
        std::cout << (j ? "," : "") << format_number(rows.back().lambda(j));
      }
      std::cout << ") per-agent cost " << format_number(run.per_agent_cost) << "\n";
    }
  }
  write_file(out / "sweep.csv", sweep_csv(rows));
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cooperative dynamic collective choice solver"};
  app.require_subcommand(1);

  std::string out_dir = default_out_dir();
  app.add_option("--out", out_dir, "output directory (env DCC_OUT_DIR)")
      ->capture_default_str();

  std::string scenario_path;

  CLI::App* check = app.add_subcommand("check", "assumption diagnostics");
  check->add_option("scenario", scenario_path, "scenario JSON")->required();

  bool uniform = false;
  CLI::App* solve_mf = app.add_subcommand("solve-mf", "mean-field fixed point");
  solve_mf->add_option("scenario", scenario_path, "scenario JSON")->required();
  solve_mf->add_flag("--uniform", uniform, "halfspace bisection fast path");

  std::string agents_path;
  int exact_n = 0;
  bool cost_table = false;
  CLI::App* solve_exact = app.add_subcommand("solve-exact", "centralized optimum");
  solve_exact->add_option("scenario", scenario_path, "scenario JSON")->required();
  solve_exact->add_option("--agents", agents_path, "agents JSON file");
  solve_exact->add_option("-N", exact_n, "sample this many agents instead");
  solve_exact->add_flag("--cost-table", cost_table, "emit every assignment's cost");

  int sim_n = 400;
  std::uint64_t sim_seed = 0;
  bool no_paths = false;
  CLI::App* simulate = app.add_subcommand("simulate", "finite population run");
  simulate->add_option("scenario", scenario_path, "scenario JSON")->required();
  simulate->add_option("-N", sim_n, "population size")->capture_default_str();
  CLI::Option* seed_opt = simulate->add_option("--seed", sim_seed, "sampling seed");
  simulate->add_flag("--no-paths", no_paths, "skip the trajectory CSV");

  std::string param = "q";
  std::vector<Scalar> values;
  std::vector<std::string> modes = {"cooperative", "noncooperative"};
  int sweep_n = 400;
  CLI::App* sweep = app.add_subcommand("sweep", "parameter sweep");
  sweep->add_option("scenario", scenario_path, "scenario JSON")->required();
  sweep->add_option("--param", param, "swept parameter")->capture_default_str();
  sweep->add_option("--values", values, "parameter values")->required()->delimiter(',');
  sweep->add_option("--modes", modes, "coupling modes")->delimiter(',');
  sweep->add_option("-N", sweep_n, "population size for realized costs")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_validation;
  }

  const fs::path out(out_dir);
  try {
    if (check->parsed()) return run_check(scenario_path, out);
    if (solve_mf->parsed()) return run_solve_mf(scenario_path, uniform, out);
    if (solve_exact->parsed()) {
      return run_solve_exact(scenario_path, agents_path, exact_n, cost_table, out);
    }
    if (simulate->parsed()) {
      return run_simulate(scenario_path, sim_n, sim_seed, seed_opt->count() > 0,
                          no_paths, out);
    }
    if (sweep->parsed()) {
      return run_sweep(scenario_path, param, values, modes, sweep_n, out);
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return exit_validation;
  } catch (const CapExceededError& e) {
    std::cerr << "cap exceeded: " << e.what() << "\n";
    return exit_cap_exceeded;
  } catch (const ConvergenceError& e) {
    std::cerr << "no convergence: " << e.what() << "\nresidual history:";
    for (const Scalar r : e.residual_history) std::cerr << " " << format_number(r);
    std::cerr << "\n";
    return exit_no_convergence;
  } catch (const IntegrationError& e) {
    std::cerr << "integration failure: " << e.what() << "\n";
    return exit_no_convergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_ok;
}
