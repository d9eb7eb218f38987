#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vsb/errors.hpp"
#include "vsb/pipeline.hpp"

using namespace vsb;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "vsb_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing and validation") {
  RunConfig cfg = parse_config(R"({
    "problem": "hopf-normal-cosforce",
    "guess": [1.0, 0.0],
    "eps_ladder": [0.1, 0.01],
    "stages": ["cycle", "malkin"],
    "tolerances": {"abs_tol": 1e-9, "method": "rk4-fixed"}
  })");
  CHECK(cfg.problem == "hopf-normal-cosforce");
  CHECK(cfg.guess.size() == 2);
  CHECK(cfg.tol.abs_tol == 1e-9);
  CHECK(cfg.tol.method == "rk4-fixed");
  CHECK(cfg.stages.size() == 2);

  CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"eps_ladder": [0.01, 0.1]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"eps_ladder": [0.1, -0.01]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"stages": ["cycle", "plot"]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"tolerances": {"method": "euler"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"theta_grid": 4})"), ConfigError);

  try {
    parse_config(R"({"eps_ladder": [0.01, 0.1]})");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("strictly decreasing") != std::string::npos);
  }

  // inline problem spec with parameters
  RunConfig inl = parse_config(R"({
    "problem": {"name": "hopf-normal-cosforce", "params": {"forcing_shift": 1.0}},
    "guess": [1.0, 0.0]
  })");
  CHECK(inl.problem == "hopf-normal-cosforce");
  CHECK(inl.problem_params.at("forcing_shift") == 1.0);
}

TEST_CASE("unknown problem name surfaces as a config error") {
  RunConfig cfg;
  cfg.problem = "no-such-system";
  cfg.guess = (Vec(2) << 1.0, 0.0).finished();
  cfg.outputs = fresh_dir("unknown_problem").string();
  CHECK_THROWS_AS(run(cfg), ConfigError);
}

TEST_CASE("stage gating: malkin stage writes only its artifacts") {
  RunConfig cfg;
  cfg.guess = (Vec(2) << 1.0, 0.0).finished();
  cfg.stages = {"malkin"};
  cfg.theta_grid = 32;
  fs::path dir = fresh_dir("malkin_only");
  cfg.outputs = dir.string();

  RunResult res = run(cfg);
  CHECK(res.exit_code == 0);
  CHECK(fs::exists(dir / "malkin_profile.csv"));
  CHECK(fs::exists(dir / "malkin_profile.dat"));
  CHECK(fs::exists(dir / "zeros.json"));
  CHECK(fs::exists(dir / "run_manifest.json"));
  CHECK_FALSE(fs::exists(dir / "scaling_branch.csv"));
  CHECK_FALSE(fs::exists(dir / "convergence_report.csv"));

  // csv header and row count
  std::istringstream csv(slurp(dir / "malkin_profile.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "theta,M,Mprime");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 32);
}

TEST_CASE("full pipeline on the bundled config") {
  RunConfig cfg = load_config_file(std::string(VSB_SOURCE_DIR) + "/configs/hopf_cosforce.json");
  fs::path dir = fresh_dir("bundled");
  cfg.outputs = dir.string();

  RunResult res = run(cfg);
  CHECK(res.exit_code == 0);

  nlohmann::json zeros = nlohmann::json::parse(slurp(dir / "zeros.json"));
  REQUIRE(zeros.at("zeros").size() == 2);
  CHECK(std::abs(zeros["zeros"][0]["theta0"].get<double>() - 0.0) < 1e-8);
  CHECK(std::abs(zeros["zeros"][1]["theta0"].get<double>() - M_PI) < 1e-8);
  CHECK(zeros["zeros"][0]["stable_candidate"].get<bool>());
  CHECK_FALSE(zeros["zeros"][1]["stable_candidate"].get<bool>());

  for (const char* f : {"malkin_profile.csv", "zeros.json", "scaling_branch.csv",
                        "scaling_summary.json", "convergence_report.csv",
                        "convergence_report.json", "ladder.dat", "run_manifest.json"})
    CHECK(fs::exists(dir / f));

  nlohmann::json summary = nlohmann::json::parse(slurp(dir / "scaling_summary.json"));
  CHECK(std::abs(summary[0]["lambda_star"].get<double>() - (-M_PI)) < 1e-4);
  CHECK(std::abs(summary[1]["lambda_star"].get<double>() - M_PI) < 1e-4);

  nlohmann::json report = nlohmann::json::parse(slurp(dir / "convergence_report.json"));
  for (const auto& entry : report) {
    for (const auto& [name, ok] : entry.at("checks").items()) {
      INFO(name);
      CHECK(ok.get<bool>());
    }
  }
}

TEST_CASE("manifest lists every tolerance knob") {
  RunConfig cfg;
  cfg.guess = (Vec(2) << 1.0, 0.0).finished();
  cfg.stages = {"cycle"};
  fs::path dir = fresh_dir("manifest");
  cfg.outputs = dir.string();
  REQUIRE(run(cfg).exit_code == 0);

  nlohmann::json manifest = nlohmann::json::parse(slurp(dir / "run_manifest.json"));
  for (const char* key :
       {"abs_tol", "rel_tol", "method", "rk4_steps", "cycle_tol", "cycle_max_iter",
        "samples_per_period", "unit_multiplier_tol", "stability_margin", "zero_tol",
        "degeneracy_tol", "quadrature_tol", "newton_tol", "newton_max_iter", "audit_tol",
        "invertibility_floor", "noise_guard", "riesz_points", "fixed_point_tol",
        "fixed_point_max_iter", "singular_floor", "slope_threshold",
        "position_agreement"}) {
    INFO(key);
    CHECK(manifest.at("tolerances").contains(key));
  }
  CHECK(manifest.at("version").get<std::string>() == kVersion);
}

TEST_CASE("fixed-step runs are bitwise reproducible") {
  RunConfig cfg;
  cfg.guess = (Vec(2) << 1.0, 0.0).finished();
  cfg.stages = {"malkin"};
  cfg.theta_grid = 24;
  cfg.tol.method = "rk4-fixed";
  cfg.tol.rk4_steps = 1024;
  cfg.tol.cycle_tol = 1e-7;  // fixed-step map has a larger phase drift

  fs::path d1 = fresh_dir("repro1"), d2 = fresh_dir("repro2");
  cfg.outputs = d1.string();
  REQUIRE(run(cfg).exit_code == 0);
  cfg.outputs = d2.string();
  REQUIRE(run(cfg).exit_code == 0);
  CHECK(slurp(d1 / "malkin_profile.csv") == slurp(d2 / "malkin_profile.csv"));
  CHECK(slurp(d1 / "zeros.json") == slurp(d2 / "zeros.json"));
}

TEST_CASE("free forcing fails the scaling stage with exit 1") {
  RunConfig cfg;
  cfg.problem = "hopf-normal-free";
  cfg.guess = (Vec(2) << 1.0, 0.0).finished();
  cfg.stages = {"scaling"};
  cfg.theta_grid = 32;
  fs::path dir = fresh_dir("free_scaling");
  cfg.outputs = dir.string();
  RunResult res = run(cfg);
  CHECK(res.exit_code == 1);
  CHECK(res.message.find("scaling") != std::string::npos);
}

TEST_CASE("cli binary exit codes") {
  const std::string cli = VSB_CLI_PATH;
  fs::path dir = fresh_dir("cli_binary");

  fs::path bad = dir / "bad.json";
  std::ofstream(bad) << R"({"guess": [1.0, 0.0], "eps_ladder": [0.01, 0.1]})";
  const int rc_bad =
      std::system((cli + " --config " + bad.string() + " > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(rc_bad) == 2);

  fs::path ok = dir / "ok.json";
  std::ofstream(ok) << R"({"problem": "hopf-normal-cosforce", "guess": [1.0, 0.0],
                           "theta_grid": 24})";
  const int rc_ok = std::system((cli + " --config " + ok.string() + " --stage malkin --out " +
                                 (dir / "out").string() + " > /dev/null 2>&1")
                                    .c_str());
  CHECK(WEXITSTATUS(rc_ok) == 0);
  CHECK(fs::exists(dir / "out" / "zeros.json"));
}
