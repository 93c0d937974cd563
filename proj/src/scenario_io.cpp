#include "dcc/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dcc/errors.hpp"

namespace dcc {

namespace {

const Json& require(const Json& j, const std::string& key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ValidationError("missing field: " + (where.empty() ? key : where + "." + key));
  }
  return *it;
}

Scalar as_scalar(const Json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError(field + " must be a number");
  return j.get<Scalar>();
}

int as_int(const Json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ValidationError(field + " must be an integer");
  return j.get<int>();
}

Vector parse_vector(const Json& j, long size, const std::string& field) {
  if (!j.is_array() || static_cast<long>(j.size()) != size) {
    throw ValidationError(field + " must be an array of length " + std::to_string(size));
  }
  Vector v(size);
  for (long i = 0; i < size; ++i) v(i) = as_scalar(j[i], field);
  return v;
}

Matrix parse_matrix(const Json& j, long rows, long cols, const std::string& field) {
  if (!j.is_array() || static_cast<long>(j.size()) != rows * cols) {
    throw ValidationError(field + " must be a row-major array of length " +
                          std::to_string(rows * cols));
  }
  Matrix m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) m(r, c) = as_scalar(j[r * cols + c], field);
  }
  return m;
}

Json dump_vector(const Vector& v) {
  Json out = Json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json dump_matrix(const Matrix& m) {
  Json out = Json::array();
  for (long r = 0; r < m.rows(); ++r) {
    for (long c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

}  // namespace

Scenario scenario_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("scenario must be a JSON object");

  Scenario s;
  s.state_dim = as_int(require(j, "n", ""), "n");
  s.control_dim = as_int(require(j, "m", ""), "m");
  s.num_destinations = as_int(require(j, "l", ""), "l");
  s.horizon = as_scalar(require(j, "horizon", ""), "horizon");
  s.steps = j.contains("steps") ? as_int(j["steps"], "steps") : 0;
  if (s.steps < 0) throw ValidationError("steps must be nonnegative");

  s.coupling.q = as_scalar(require(j, "q", ""), "q");
  s.coupling.Z = parse_matrix(require(j, "Z", ""), s.state_dim, s.state_dim, "Z");
  if (j.contains("mode")) {
    const std::string mode = j["mode"].is_string()
                                 ? j["mode"].get<std::string>()
                                 : throw ValidationError("mode must be a string");
    if (mode == "cooperative") {
      s.coupling.mode = CouplingMode::cooperative;
    } else if (mode == "noncooperative") {
      s.coupling.mode = CouplingMode::noncooperative;
    } else {
      throw ValidationError("mode must be \"cooperative\" or \"noncooperative\"");
    }
  }

  const Json& dests = require(j, "destinations", "");
  if (!dests.is_array() || static_cast<int>(dests.size()) != s.num_destinations) {
    throw ValidationError("destinations must list l points");
  }
  for (int k = 0; k < s.num_destinations; ++k) {
    s.destinations.push_back(
        parse_vector(dests[k], s.state_dim, "destinations[" + std::to_string(k) + "]"));
  }

  const Json& atoms = require(j, "atoms", "");
  if (!atoms.is_array() || atoms.empty()) {
    throw ValidationError("atoms must be a nonempty array");
  }
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    const std::string where = "atoms[" + std::to_string(a) + "]";
    const Json& ja = atoms[a];
    if (!ja.is_object()) throw ValidationError(where + " must be an object");
    AgentType atom;
    atom.A = parse_matrix(require(ja, "A", where), s.state_dim, s.state_dim, where + ".A");
    atom.B = parse_matrix(require(ja, "B", where), s.state_dim, s.control_dim, where + ".B");
    atom.r = as_scalar(require(ja, "r", where), where + ".r");
    atom.terminal_weights =
        parse_vector(require(ja, "M", where), s.num_destinations, where + ".M");
    atom.weight =
        ja.contains("weight") ? as_scalar(ja["weight"], where + ".weight") : 1.0;
    s.atoms.push_back(std::move(atom));
  }

  const Json& init = require(j, "initial", "");
  if (!init.is_object()) throw ValidationError("initial must be an object");
  const std::string kind = require(init, "kind", "initial").is_string()
                               ? init["kind"].get<std::string>()
                               : throw ValidationError("initial.kind must be a string");
  if (kind == "gaussian") {
    s.initial.kind = InitialKind::gaussian;
    s.initial.mean = parse_vector(require(init, "mean", "initial"), s.state_dim,
                                  "initial.mean");
    s.initial.covariance = parse_matrix(require(init, "covariance", "initial"),
                                        s.state_dim, s.state_dim, "initial.covariance");
  } else if (kind == "points") {
    s.initial.kind = InitialKind::points;
    const Json& pts = require(init, "points", "initial");
    if (!pts.is_array() || pts.empty()) {
      throw ValidationError("initial.points must be a nonempty array");
    }
    for (std::size_t p = 0; p < pts.size(); ++p) {
      s.initial.points.push_back(parse_vector(
          pts[p], s.state_dim, "initial.points[" + std::to_string(p) + "]"));
    }
  } else {
    throw ValidationError("initial.kind must be \"gaussian\" or \"points\"");
  }

  if (j.contains("solver")) {
    const Json& sol = j["solver"];
    if (!sol.is_object()) throw ValidationError("solver must be an object");
    if (sol.contains("tol")) s.solver.tol = as_scalar(sol["tol"], "solver.tol");
    if (sol.contains("max_iter")) {
      s.solver.max_iter = as_int(sol["max_iter"], "solver.max_iter");
    }
    if (sol.contains("damping")) {
      s.solver.damping = as_scalar(sol["damping"], "solver.damping");
    }
    if (sol.contains("mc_samples")) {
      s.solver.mc_samples = as_int(sol["mc_samples"], "solver.mc_samples");
    }
    if (sol.contains("enumeration_cap")) {
      if (!sol["enumeration_cap"].is_number_integer()) {
        throw ValidationError("solver.enumeration_cap must be an integer");
      }
      s.solver.enumeration_cap = sol["enumeration_cap"].get<long>();
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) throw ValidationError("seed must be an integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }

  s.validate();
  return s;
}

Json scenario_to_json(const Scenario& scenario) {
  Json j;
  j["n"] = scenario.state_dim;
  j["m"] = scenario.control_dim;
  j["l"] = scenario.num_destinations;
  j["horizon"] = scenario.horizon;
  j["steps"] = scenario.steps;
  j["q"] = scenario.coupling.q;
  j["Z"] = dump_matrix(scenario.coupling.Z);
  j["mode"] = scenario.coupling.mode == CouplingMode::cooperative ? "cooperative"
                                                                  : "noncooperative";
  Json dests = Json::array();
  for (const Vector& p : scenario.destinations) dests.push_back(dump_vector(p));
  j["destinations"] = std::move(dests);

  Json atoms = Json::array();
  for (const AgentType& atom : scenario.atoms) {
    Json ja;
    ja["A"] = dump_matrix(atom.A);
    ja["B"] = dump_matrix(atom.B);
    ja["r"] = atom.r;
    ja["M"] = dump_vector(atom.terminal_weights);
    ja["weight"] = atom.weight;
    atoms.push_back(std::move(ja));
  }
  j["atoms"] = std::move(atoms);

  Json init;
  if (scenario.initial.kind == InitialKind::gaussian) {
    init["kind"] = "gaussian";
    init["mean"] = dump_vector(scenario.initial.mean);
    init["covariance"] = dump_matrix(scenario.initial.covariance);
  } else {
    init["kind"] = "points";
    Json pts = Json::array();
    for (const Vector& p : scenario.initial.points) pts.push_back(dump_vector(p));
    init["points"] = std::move(pts);
  }
  j["initial"] = std::move(init);

  Json sol;
  sol["tol"] = scenario.solver.tol;
  sol["max_iter"] = scenario.solver.max_iter;
  sol["damping"] = scenario.solver.damping;
  sol["mc_samples"] = scenario.solver.mc_samples;
  sol["enumeration_cap"] = scenario.solver.enumeration_cap;
  j["solver"] = std::move(sol);
  j["seed"] = scenario.seed;
  return j;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("scenario parse error in " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write scenario file: " + path);
  out << scenario_to_json(scenario).dump(2) << "\n";
}

}  // namespace dcc
