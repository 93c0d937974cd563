#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

// End-to-end runs of the command line tool against the shipped scenario.
// Each case gets its own output directory under the system temp dir.

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dcc_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = std::string(DCC_CLI_PATH) + " --out " +
                          (dir / "out").string() + " " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

std::string benchmark_path() {
  return (fs::path(DCC_SCENARIO_DIR) / "two_destinations.json").string();
}

nlohmann::json benchmark_json() {
  return nlohmann::json::parse(slurp(benchmark_path()));
}

fs::path write_json_file(const fs::path& dir, const std::string& name,
                         const nlohmann::json& j) {
  const fs::path path = dir / name;
  std::ofstream(path) << j.dump(2);
  return path;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("cli: check reports diagnostics without failing") {
  const fs::path dir = fresh_dir("check");
  const CliResult r = run_cli(dir, "check " + benchmark_path());
  CHECK(r.code == 0);  // diagnostics never block the solve
  CHECK(contains(r.out, "contraction bound NOT satisfied"));
  CHECK(contains(r.out, "positive semidefinite"));
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "check.json"));
  CHECK(j["horizon_ok"] == false);
  CHECK(j["coupling_ok"] == true);
  CHECK(std::abs(j["initial_second_moment"].get<double>() - 155.0) < 1e-9);
}

TEST_CASE("cli: solve-mf is reproducible byte for byte") {
  const fs::path dir1 = fresh_dir("mf1");
  const fs::path dir2 = fresh_dir("mf2");
  const CliResult r1 = run_cli(dir1, "solve-mf " + benchmark_path());
  const CliResult r2 = run_cli(dir2, "solve-mf " + benchmark_path());
  REQUIRE(r1.code == 0);
  REQUIRE(r2.code == 0);
  CHECK(contains(r1.out, "fractions:"));
  CHECK(slurp(dir1 / "out" / "xbar.csv") == slurp(dir2 / "out" / "xbar.csv"));
  CHECK(slurp(dir1 / "out" / "lambda.json") ==
        slurp(dir2 / "out" / "lambda.json"));

  const auto lambda = nlohmann::json::parse(slurp(dir1 / "out" / "lambda.json"));
  CHECK(lambda["method"] == "picard");
  const double right = lambda["fractions"][1].get<double>();
  CHECK(right > 0.78);
  CHECK(right < 0.86);
  CHECK(fs::exists(dir1 / "out" / "basins.json"));
  CHECK(fs::exists(dir1 / "out" / "cost.json"));
}

TEST_CASE("cli: solve-mf --uniform takes the bisection route") {
  const fs::path dir = fresh_dir("uniform");
  const CliResult r = run_cli(dir, "solve-mf --uniform " + benchmark_path());
  REQUIRE(r.code == 0);
  const auto lambda = nlohmann::json::parse(slurp(dir / "out" / "lambda.json"));
  CHECK(lambda["method"] == "bisection");
  const double left = lambda["fractions"][0].get<double>();
  CHECK(left > 0.14);
  CHECK(left < 0.22);
}

TEST_CASE("cli: malformed scenario exits with the validation code") {
  const fs::path dir = fresh_dir("badcov");
  nlohmann::json j = benchmark_json();
  j["initial"]["covariance"] = {15.0, 0.0, 0.0};  // 3 entries for a 2x2
  const fs::path bad = write_json_file(dir, "bad.json", j);
  const CliResult r = run_cli(dir, "check " + bad.string());
  CHECK(r.code == 2);
  CHECK(contains(r.err, "covariance"));
}

TEST_CASE("cli: exhausted iteration budget exits with the convergence code") {
  const fs::path dir = fresh_dir("noconv");
  nlohmann::json j = benchmark_json();
  j["q"] = 40.0;
  j["solver"]["max_iter"] = 1;
  const fs::path hard = write_json_file(dir, "hard.json", j);
  const CliResult r = run_cli(dir, "solve-mf " + hard.string());
  CHECK(r.code == 3);
  CHECK(contains(r.err, "no convergence"));
  CHECK(contains(r.err, "residual history"));
}

TEST_CASE("cli: enumeration cap exits with the cap code") {
  const fs::path dir = fresh_dir("cap");
  const CliResult r = run_cli(dir, "solve-exact -N 13 " + benchmark_path());
  CHECK(r.code == 4);
  CHECK(contains(r.err, "cap exceeded"));
}

TEST_CASE("cli: solve-exact consumes an agents file") {
  const fs::path dir = fresh_dir("exact");
  nlohmann::json agents;
  agents["agents"] = {{{"atom", 0}, {"x0", {-5.0, 10.0}}},
                      {{"atom", 0}, {"x0", {5.0, 10.0}}}};
  const fs::path agents_path = write_json_file(dir, "agents.json", agents);
  const CliResult r = run_cli(
      dir, "solve-exact --agents " + agents_path.string() + " " +
               benchmark_path());
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "assignment:"));
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "exact.json"));
  CHECK(j["N"] == 2);
  CHECK(j["assignment"].size() == 2);
  CHECK(j["cost"].get<double>() > 0.0);
  CHECK(fs::exists(dir / "out" / "trajectories.csv"));

  const CliResult missing = run_cli(dir, "solve-exact " + benchmark_path());
  CHECK(missing.code == 2);
  CHECK(contains(missing.err, "--agents"));
}

TEST_CASE("cli: simulate summarizes a finite population") {
  const fs::path dir1 = fresh_dir("sim1");
  const fs::path dir2 = fresh_dir("sim2");
  const std::string args =
      "simulate -N 50 --seed 9 --no-paths " + benchmark_path();
  const CliResult r1 = run_cli(dir1, args);
  const CliResult r2 = run_cli(dir2, args);
  REQUIRE(r1.code == 0);
  REQUIRE(r2.code == 0);
  CHECK(slurp(dir1 / "out" / "summary.json") ==
        slurp(dir2 / "out" / "summary.json"));
  CHECK(!fs::exists(dir1 / "out" / "trajectories.csv"));

  const auto j = nlohmann::json::parse(slurp(dir1 / "out" / "summary.json"));
  CHECK(j["N"] == 50);
  CHECK(j["seed"] == 9);
  const double sum = j["fractions"][0].get<double>() +
                     j["fractions"][1].get<double>();
  CHECK(std::abs(sum - 1.0) < 1e-12);
  CHECK(j["per_agent_cost"].get<double>() > 0.0);
}

TEST_CASE("cli: sweep emits one row per configuration") {
  const fs::path dir = fresh_dir("sweep");
  const CliResult r = run_cli(
      dir, "sweep --values 0 --modes cooperative -N 25 " + benchmark_path());
  REQUIRE(r.code == 0);
  const std::string csv = slurp(dir / "out" / "sweep.csv");
  CHECK(contains(csv, "q,mode"));
  CHECK(contains(csv, "cooperative"));

  const CliResult bad = run_cli(
      dir, "sweep --param r --values 1 " + benchmark_path());
  CHECK(bad.code == 2);
  CHECK(contains(bad.err, "--param q"));
}

TEST_CASE("cli: argument errors use the validation code") {
  const fs::path dir = fresh_dir("args");
  CHECK(run_cli(dir, "").code == 2);
  CHECK(run_cli(dir, "frobnicate x.json").code == 2);
  CHECK(run_cli(dir, "--help").code == 0);
}
