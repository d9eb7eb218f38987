#include "vsb/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vsb/errors.hpp"

namespace vsb {

using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& j, const char* name, T& out) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + name + "': " + e.what());
  }
}

void read_tolerances(const json& j, ToleranceConfig& tol) {
  read_field(j, "abs_tol", tol.abs_tol);
  read_field(j, "rel_tol", tol.rel_tol);
  read_field(j, "method", tol.method);
  read_field(j, "rk4_steps", tol.rk4_steps);
  read_field(j, "cycle_tol", tol.cycle_tol);
  read_field(j, "cycle_max_iter", tol.cycle_max_iter);
  read_field(j, "samples_per_period", tol.samples_per_period);
  read_field(j, "unit_multiplier_tol", tol.unit_multiplier_tol);
  read_field(j, "stability_margin", tol.stability_margin);
  read_field(j, "zero_tol", tol.zero_tol);
  read_field(j, "degeneracy_tol", tol.degeneracy_tol);
  read_field(j, "quadrature_tol", tol.quadrature_tol);
  read_field(j, "newton_tol", tol.newton_tol);
  read_field(j, "newton_max_iter", tol.newton_max_iter);
  read_field(j, "audit_tol", tol.audit_tol);
  read_field(j, "invertibility_floor", tol.invertibility_floor);
  read_field(j, "noise_guard", tol.noise_guard);
  read_field(j, "riesz_points", tol.riesz_points);
  read_field(j, "fixed_point_tol", tol.fixed_point_tol);
  read_field(j, "fixed_point_max_iter", tol.fixed_point_max_iter);
  read_field(j, "singular_floor", tol.singular_floor);
  read_field(j, "slope_threshold", tol.slope_threshold);
  read_field(j, "position_agreement", tol.position_agreement);
  if (tol.method != "rk45" && tol.method != "rk4-fixed")
    throw ConfigError("config field 'method': must be \"rk45\" or \"rk4-fixed\"");
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  RunConfig cfg;
  if (j.contains("problem")) {
    const json& p = j.at("problem");
    if (p.is_string()) {
      cfg.problem = p.get<std::string>();
    } else if (p.is_object()) {
      // inline form: {"name": ..., "params": {...}}
      if (!p.contains("name"))
        throw ConfigError("config field 'problem': inline spec needs a 'name'");
      cfg.problem = p.at("name").get<std::string>();
      if (p.contains("params")) {
        for (auto it = p.at("params").begin(); it != p.at("params").end(); ++it) {
          if (!it.value().is_number())
            throw ConfigError("config field 'problem.params." + it.key() +
                              "': must be numeric");
          cfg.problem_params[it.key()] = it.value().get<double>();
        }
      }
    } else {
      throw ConfigError("config field 'problem': must be a name or an inline object");
    }
  }

  if (j.contains("guess")) {
    std::vector<double> g;
    read_field(j, "guess", g);
    cfg.guess = Eigen::Map<const Vec>(g.data(), static_cast<long>(g.size()));
  }

  if (j.contains("tolerances")) read_tolerances(j.at("tolerances"), cfg.tol);
  read_field(j, "theta_grid", cfg.theta_grid);
  if (cfg.theta_grid < 16) throw ConfigError("config field 'theta_grid': must be >= 16");

  if (j.contains("eps_ladder")) {
    std::vector<double> ladder;
    read_field(j, "eps_ladder", ladder);
    cfg.eps_ladder = ladder;
  }
  for (std::size_t i = 0; i < cfg.eps_ladder.size(); ++i) {
    if (cfg.eps_ladder[i] <= 0.0)
      throw ConfigError("config field 'eps_ladder': entries must be positive");
    if (i > 0 && cfg.eps_ladder[i] >= cfg.eps_ladder[i - 1])
      throw ConfigError("config field 'eps_ladder': must be strictly decreasing");
  }

  read_field(j, "outputs", cfg.outputs);
  if (j.contains("stages")) {
    std::vector<std::string> st;
    read_field(j, "stages", st);
    cfg.stages = st;
  }
  for (const auto& s : cfg.stages)
    if (s != "cycle" && s != "malkin" && s != "scaling" && s != "validate")
      throw ConfigError("config field 'stages': unknown stage '" + s + "'");
  read_field(j, "seed", cfg.seed);
  read_field(j, "strict", cfg.strict);
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

std::string config_manifest_json(const RunConfig& cfg, const std::string& version) {
  json j;
  j["tool"] = "vsb";
  j["version"] = version;
  j["problem"] = cfg.problem;
  j["problem_params"] = cfg.problem_params;
  std::vector<double> g(cfg.guess.data(), cfg.guess.data() + cfg.guess.size());
  j["guess"] = g;
  j["theta_grid"] = cfg.theta_grid;
  j["eps_ladder"] = cfg.eps_ladder;
  j["stages"] = cfg.stages;
  j["outputs"] = cfg.outputs;
  j["seed"] = cfg.seed;
  j["strict"] = cfg.strict;

  json t;
  const ToleranceConfig& tol = cfg.tol;
  t["abs_tol"] = tol.abs_tol;
  t["rel_tol"] = tol.rel_tol;
  t["method"] = tol.method;
  t["rk4_steps"] = tol.rk4_steps;
  t["cycle_tol"] = tol.cycle_tol;
  t["cycle_max_iter"] = tol.cycle_max_iter;
  t["samples_per_period"] = tol.samples_per_period;
  t["unit_multiplier_tol"] = tol.unit_multiplier_tol;
  t["stability_margin"] = tol.stability_margin;
  t["zero_tol"] = tol.zero_tol;
  t["degeneracy_tol"] = tol.degeneracy_tol;
  t["quadrature_tol"] = tol.quadrature_tol;
  t["newton_tol"] = tol.newton_tol;
  t["newton_max_iter"] = tol.newton_max_iter;
  t["audit_tol"] = tol.audit_tol;
  t["invertibility_floor"] = tol.invertibility_floor;
  t["noise_guard"] = tol.noise_guard;
  t["riesz_points"] = tol.riesz_points;
  t["fixed_point_tol"] = tol.fixed_point_tol;
  t["fixed_point_max_iter"] = tol.fixed_point_max_iter;
  t["singular_floor"] = tol.singular_floor;
  t["slope_threshold"] = tol.slope_threshold;
  t["position_agreement"] = tol.position_agreement;
  j["tolerances"] = t;
  return j.dump(2);
}

IntegratorOptions integrator_options(const RunConfig& cfg) {
  IntegratorOptions o;
  o.abs_tol = cfg.tol.abs_tol;
  o.rel_tol = cfg.tol.rel_tol;
  o.method = cfg.tol.method == "rk4-fixed" ? OdeMethod::rk4_fixed : OdeMethod::rk45;
  o.rk4_steps = cfg.tol.rk4_steps;
  return o;
}

CycleOptions cycle_options(const RunConfig& cfg) {
  CycleOptions o;
  o.cycle_tol = cfg.tol.cycle_tol;
  o.max_iter = cfg.tol.cycle_max_iter;
  o.samples_per_period = cfg.tol.samples_per_period;
  o.unit_multiplier_tol = cfg.tol.unit_multiplier_tol;
  o.stability_margin = cfg.tol.stability_margin;
  return o;
}

MalkinOptions malkin_options(const RunConfig& cfg) {
  MalkinOptions o;
  o.theta_grid = cfg.theta_grid;
  o.zero_tol = cfg.tol.zero_tol;
  o.degeneracy_tol = cfg.tol.degeneracy_tol;
  return o;
}

ScalingOptions scaling_options(const RunConfig& cfg) {
  ScalingOptions o;
  o.newton_tol = cfg.tol.newton_tol;
  o.newton_max_iter = cfg.tol.newton_max_iter;
  o.audit_tol = cfg.tol.audit_tol;
  o.invertibility_floor = cfg.tol.invertibility_floor;
  o.noise_guard = cfg.tol.noise_guard;
  o.riesz_points = cfg.tol.riesz_points;
  o.seed = cfg.seed;
  return o;
}

FixedPointOptions fixed_point_options(const RunConfig& cfg) {
  FixedPointOptions o;
  o.tol = cfg.tol.fixed_point_tol;
  o.max_iter = cfg.tol.fixed_point_max_iter;
  o.singular_floor = cfg.tol.singular_floor;
  return o;
}

}  // namespace vsb
