#pragma once

#include <map>
#include <string>
#include <vector>

#include "vsb/cycle.hpp"
#include "vsb/malkin.hpp"
#include "vsb/ode.hpp"
#include "vsb/scaling.hpp"
#include "vsb/types.hpp"
#include "vsb/validator.hpp"

namespace vsb {

/// Every numeric knob that can affect results; dumped into run_manifest.json.
struct ToleranceConfig {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  std::string method = "rk45";  // "rk45" or "rk4-fixed"
  int rk4_steps = 4096;

  double cycle_tol = 1e-9;
  int cycle_max_iter = 30;
  int samples_per_period = 512;
  double unit_multiplier_tol = 1e-6;
  double stability_margin = 1e-4;

  double zero_tol = 1e-10;
  double degeneracy_tol = 1e-6;
  double quadrature_tol = 1e-10;

  double newton_tol = 1e-10;
  int newton_max_iter = 25;
  double audit_tol = 1e-5;
  double invertibility_floor = 1e-6;
  double noise_guard = 100.0;
  int riesz_points = 64;

  double fixed_point_tol = 1e-11;
  int fixed_point_max_iter = 20;
  double singular_floor = 1e-7;

  double slope_threshold = 0.8;
  double position_agreement = 1e-6;
};

struct RunConfig {
  std::string problem = "hopf-normal-cosforce";
  std::map<std::string, double> problem_params;
  Vec guess;
  ToleranceConfig tol;
  int theta_grid = 128;
  std::vector<double> eps_ladder{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  std::string outputs = "out";
  std::vector<std::string> stages{"cycle", "malkin", "scaling", "validate"};
  unsigned seed = 12345;
  bool strict = false;
};

/// Parse and validate a JSON config document. Throws ConfigError with the
/// offending field in the message.
RunConfig parse_config(const std::string& json_text);

RunConfig load_config_file(const std::string& path);

/// Serialized echo of the full effective configuration (manifest content).
std::string config_manifest_json(const RunConfig& cfg, const std::string& version);

IntegratorOptions integrator_options(const RunConfig& cfg);
CycleOptions cycle_options(const RunConfig& cfg);
MalkinOptions malkin_options(const RunConfig& cfg);
ScalingOptions scaling_options(const RunConfig& cfg);
FixedPointOptions fixed_point_options(const RunConfig& cfg);

}  // namespace vsb
