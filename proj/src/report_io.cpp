#include "dcc/report_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dcc/errors.hpp"

namespace dcc {

std::string format_number(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string xbar_csv(const VectorPath& xbar) {
  std::ostringstream out;
  out << "t";
  const long n = xbar.values.empty() ? 0 : xbar[0].size();
  for (long c = 0; c < n; ++c) out << ",x" << c + 1;
  out << "\n";
  for (int k = 0; k < xbar.grid.size(); ++k) {
    out << format_number(xbar.grid.time(k));
    for (long c = 0; c < n; ++c) out << "," << format_number(xbar[k](c));
    out << "\n";
  }
  return out.str();
}

std::string trajectories_csv(const std::vector<VectorPath>& states,
                             const std::vector<VectorPath>& controls,
                             const std::vector<int>& choices) {
  if (states.empty() || states.size() != controls.size() ||
      states.size() != choices.size()) {
    throw ValidationError("trajectory emission needs matching states/controls/choices");
  }
  const long n = states[0][0].size();
  const long m = controls[0][0].size();
  const TimeGrid& grid = states[0].grid;

  std::ostringstream out;
  out << "t,agent";
  for (long c = 0; c < n; ++c) out << ",x" << c + 1;
  for (long c = 0; c < m; ++c) out << ",u" << c + 1;
  out << ",choice\n";
  for (int k = 0; k < grid.size(); ++k) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      out << format_number(grid.time(k)) << "," << i;
      for (long c = 0; c < n; ++c) out << "," << format_number(states[i][k](c));
      for (long c = 0; c < m; ++c) out << "," << format_number(controls[i][k](c));
      out << "," << choices[i] << "\n";
    }
  }
  return out.str();
}

namespace {

Json json_vector(const Vector& v) {
  Json out = Json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json json_matrix(const Matrix& m) {
  Json out = Json::array();
  for (long r = 0; r < m.rows(); ++r) {
    for (long c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

}  // namespace

Json basins_json(const BasinClassifier& classifier) {
  Json j;
  j["num_destinations"] = classifier.num_destinations;
  Json atoms = Json::array();
  for (std::size_t a = 0; a < classifier.rows.size(); ++a) {
    Json rows = Json::array();
    const int l = classifier.num_destinations;
    for (int jd = 0; jd < l; ++jd) {
      for (int k = 0; k < l; ++k) {
        if (jd == k) continue;
        const BasinClassifier::Row& row = classifier.row(static_cast<int>(a), jd, k);
        Json jr;
        jr["j"] = jd;
        jr["k"] = k;
        jr["quad"] = json_matrix(row.quad);
        jr["lin"] = json_vector(row.lin);
        jr["offset"] = row.offset;
        rows.push_back(std::move(jr));
      }
    }
    atoms.push_back(std::move(rows));
  }
  j["atoms"] = std::move(atoms);
  return j;
}

Json lambda_json(const Vector& fractions, Scalar residual, int iterations,
                 const std::string& method) {
  Json j;
  j["fractions"] = json_vector(fractions);
  j["residual"] = residual;
  j["iterations"] = iterations;
  j["method"] = method;
  return j;
}

Json cost_json(const Scenario& scenario, Scalar asymptotic_cost) {
  Json j;
  j["q"] = scenario.coupling.q;
  j["mode"] = scenario.coupling.mode == CouplingMode::cooperative ? "cooperative"
                                                                  : "noncooperative";
  j["asymptotic_per_agent_cost"] = asymptotic_cost;
  return j;
}

Json assumption_json(const AssumptionReport& report) {
  Json j;
  j["k1"] = report.k1;
  j["k2"] = report.k2;
  j["k3"] = report.k3;
  j["horizon_bound"] = report.horizon_bound;
  j["horizon_ok"] = report.horizon_ok;
  j["coupling_eigenvalues"] = json_vector(report.coupling_eigenvalues);
  j["coupling_ok"] = report.coupling_ok;
  j["initial_second_moment"] = report.initial_second_moment;
  j["max_transition_condition"] = report.max_transition_condition;
  j["grid_stride"] = report.grid_stride;
  return j;
}

Json summary_json(const PopulationSample& sample, const PopulationRun& run,
                  Scalar residual_vs_limit) {
  Json j;
  j["N"] = sample.size();
  j["seed"] = sample.seed;
  j["fractions"] = json_vector(run.fractions);
  Json counts = Json::array();
  for (long d = 0; d < run.fractions.size(); ++d) {
    long c = 0;
    for (int choice : run.choices) c += choice == d;
    counts.push_back(c);
  }
  j["choice_counts"] = std::move(counts);
  j["total_cost"] = run.total_cost;
  j["per_agent_cost"] = run.per_agent_cost;
  j["mean_path_residual"] = residual_vs_limit;
  j["empirical_second_moment"] = sample.empirical_second_moment;
  return j;
}

Json exact_json(const CentralizedSolution& solution, int N) {
  Json j;
  j["N"] = N;
  Json d = Json::array();
  for (int v : solution.assignment) d.push_back(v);
  j["assignment"] = std::move(d);
  j["cost"] = solution.cost;
  j["per_agent_cost"] = solution.cost / static_cast<Scalar>(N);
  return j;
}

std::string cost_table_csv(const CentralizedSolution& solution) {
  std::ostringstream out;
  const std::size_t N = solution.assignment.size();
  for (std::size_t i = 0; i < N; ++i) out << "d" << i + 1 << ",";
  out << "cost\n";
  for (const auto& [d, cost] : solution.cost_table) {
    for (int v : d) out << v << ",";
    out << format_number(cost) << "\n";
  }
  return out.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  const long l = rows.empty() ? 0 : rows[0].lambda.size();
  out << "q,mode";
  for (long j = 0; j < l; ++j) out << ",lambda" << j + 1;
  out << ",per_agent_cost,asymptotic_cost,residual,iterations\n";
  for (const SweepRow& row : rows) {
    out << format_number(row.q) << "," << row.mode;
    for (long j = 0; j < l; ++j) out << "," << format_number(row.lambda(j));
    out << "," << format_number(row.per_agent_cost) << ","
        << format_number(row.asymptotic_cost) << "," << format_number(row.residual)
        << "," << row.iterations << "\n";
  }
  return out.str();
}

std::string gap_csv(const std::vector<GapRow>& rows) {
  std::ostringstream out;
  out << "N,exact_per_agent,decentralized_per_agent,gap\n";
  for (const GapRow& row : rows) {
    out << row.N << "," << format_number(row.exact_per_agent) << ","
        << format_number(row.decentralized_per_agent) << ","
        << format_number(row.gap) << "\n";
  }
  return out.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  out << content;
}

void write_json(const std::filesystem::path& path, const Json& j) {
  write_file(path, j.dump(2) + "\n");
}

}  // namespace dcc
