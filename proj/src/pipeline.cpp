#include "vsb/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "vsb/errors.hpp"
#include "vsb/poincare.hpp"
#include "vsb/validator.hpp"
#include "vsb/vectorfield.hpp"

namespace vsb {

namespace {

using nlohmann::json;

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw EvalError("cannot write output file: " + path.string());
  out << content;
}

struct StagePlan {
  bool cycle = false, malkin = false, scaling = false, validate = false;
};

StagePlan plan_stages(const RunConfig& cfg) {
  StagePlan want;
  for (const auto& s : cfg.stages) {
    if (s == "cycle") want.cycle = true;
    if (s == "malkin") want.malkin = true;
    if (s == "scaling") want.scaling = true;
    if (s == "validate") want.validate = true;
  }
  return want;
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  const StagePlan want = plan_stages(cfg);
  const bool need_validate = want.validate;
  const bool need_scaling = want.scaling || need_validate;
  const bool need_malkin = want.malkin || need_scaling;

  std::filesystem::create_directories(cfg.outputs);
  const std::filesystem::path out_dir(cfg.outputs);
  write_file(out_dir / "run_manifest.json", config_manifest_json(cfg, kVersion));

  std::string stage = "cycle";
  try {
    VectorFieldPair vf = builtin_problem(cfg.problem, cfg.problem_params);
    if (cfg.guess.size() != vf.dim)
      throw ConfigError("config field 'guess': expected " + std::to_string(vf.dim) +
                        " components for problem '" + cfg.problem + "'");
    const IntegratorOptions iopts = integrator_options(cfg);
    const CycleOptions copts = cycle_options(cfg);

    LimitCycle cycle = find_limit_cycle(vf, cfg.guess, copts, iopts);
    Monodromy mono = monodromy(vf, cycle, iopts);
    AdjointOrbit adj = adjoint_periodic(vf, cycle, mono, copts, iopts);
    StabilityHypothesis hyp = stability_hypothesis_check(mono, copts);
    const double perron = perron_check(cycle, adj);
    if (!hyp.ok)
      throw EvalError("cycle spectrum violates the stability hypothesis: " + hyp.report);
    if (!want.cycle && !need_malkin) return {0, "cycle stage ok"};

    auto ops = std::make_shared<const PoincareOperators>(vf, iopts);
    MalkinProfile profile;
    stage = "malkin";
    if (need_malkin) {
      auto M = [&](double th) { return malkin_M(cycle, adj, vf, th); };
      auto Mp = [&](double th) {
        return malkin_Mprime(local_operators(*ops, cycle, th), cycle, adj, th);
      };
      profile = find_zeros(M, Mp, cycle.period, malkin_options(cfg));

      if (want.malkin) {
        std::ostringstream csv, dat;
        csv << "theta,M,Mprime\n";
        dat << "# theta M Mprime\n";
        for (std::size_t k = 0; k < profile.theta.size(); ++k) {
          csv << fmt17(profile.theta[k]) << ',' << fmt17(profile.M[k]) << ','
              << fmt17(profile.Mprime[k]) << '\n';
          dat << fmt17(profile.theta[k]) << ' ' << fmt17(profile.M[k]) << ' '
              << fmt17(profile.Mprime[k]) << '\n';
        }
        write_file(out_dir / "malkin_profile.csv", csv.str());
        write_file(out_dir / "malkin_profile.dat", dat.str());

        json jz;
        jz["identically_zero"] = profile.identically_zero;
        jz["zeros"] = json::array();
        for (const auto& z : profile.zeros) {
          json rec;
          rec["theta0"] = z.theta0;
          rec["M"] = z.M;
          rec["Mprime"] = z.Mprime;
          rec["stable_candidate"] = z.stable_candidate;
          rec["degenerate"] = z.degenerate;
          rec["method"] = z.method;
          jz["zeros"].push_back(rec);
        }
        write_file(out_dir / "zeros.json", jz.dump(2));
      }
    }

    std::vector<MalkinZero> usable;
    for (const auto& z : profile.zeros)
      if (!z.degenerate) usable.push_back(z);

    stage = "scaling";
    std::vector<ScalingSolution> solutions;
    if (need_scaling) {
      if (profile.identically_zero)
        throw EvalError(
            "Malkin function is identically zero (g vanishes along the cycle); "
            "the scaling method is inapplicable");
      if (usable.empty())
        throw EvalError("no non-degenerate Malkin zeros; nothing to continue");

      const ScalingOptions sopts = scaling_options(cfg);
      std::ostringstream csv;
      csv << "theta0,eps";
      for (int i = 0; i < vf.dim; ++i) csv << ",w_" << (i + 1);
      csv << ",lambda_eps,residual\n";
      json summary = json::array();

      for (const auto& z : usable) {
        AssembledProblem assembled = assemble_problem(ops, cycle, adj, z.theta0, sopts);
        if (cfg.strict && !assembled.warnings.empty())
          throw EvalError("accuracy warning (strict mode): " + assembled.warnings.front());
        ScalingSolution sol = continue_branch(assembled.problem, cfg.eps_ladder, sopts);
        for (const auto& rec : sol.branch) {
          csv << fmt17(z.theta0) << ',' << fmt17(rec.eps);
          for (int i = 0; i < vf.dim; ++i) csv << ',' << fmt17(rec.w(i));
          csv << ',' << fmt17(rec.lambda) << ',' << fmt17(rec.psi_residual) << '\n';
        }
        json s;
        s["theta0"] = z.theta0;
        std::vector<double> w0(sol.w0.data(), sol.w0.data() + sol.w0.size());
        s["w0"] = w0;
        s["lambda_star"] = sol.lambda_star;
        s["psi0_residual"] = sol.psi0_residual;
        std::vector<double> e, err;
        for (const auto& rec : sol.branch) {
          e.push_back(rec.eps);
          err.push_back(std::abs(rec.lambda / rec.eps - sol.lambda_star));
        }
        if (e.size() >= 3) s["lambda_ratio_slope"] = loglog_slope(e, err);
        s["branch_points"] = sol.branch.size();
        if (!sol.branch_diagnostic.empty()) s["diagnostic"] = sol.branch_diagnostic;
        summary.push_back(s);
        solutions.push_back(std::move(sol));
      }
      if (want.scaling) {
        write_file(out_dir / "scaling_branch.csv", csv.str());
        write_file(out_dir / "scaling_summary.json", summary.dump(2));
      }
    }

    stage = "validate";
    if (need_validate) {
      LadderOptions lopts;
      lopts.scaling = scaling_options(cfg);
      lopts.fixed_point = fixed_point_options(cfg);

      std::ostringstream csv, dat;
      csv << "theta0,eps,lambda_ratio_error,position_error,rho_error,uniform_C,"
             "eigvec_angle,newton_iters,rho_real,rho_imag,stable\n";
      dat << "# eps lambda_ratio_error position_error rho_error  (blocks per theta0)\n";
      json jrep = json::array();
      std::vector<std::string> failures;

      for (const auto& z : usable) {
        ConvergenceReport rep =
            ladder_study(ops, cycle, adj, z.theta0, cfg.eps_ladder, lopts);
        for (const auto& entry : rep.entries) {
          if (!entry.scaling_ok || !entry.newton_ok) continue;
          csv << fmt17(z.theta0) << ',' << fmt17(entry.eps) << ','
              << fmt17(entry.lambda_ratio_error) << ',' << fmt17(entry.position_error)
              << ',' << fmt17(entry.rho_error) << ',' << fmt17(entry.uniform_C) << ','
              << fmt17(entry.eigvec_angle) << ',' << entry.fixed_point.iterations << ','
              << fmt17(entry.fixed_point.rho.real()) << ','
              << fmt17(entry.fixed_point.rho.imag()) << ','
              << (entry.fixed_point.stable ? 1 : 0) << '\n';
          dat << fmt17(entry.eps) << ' ' << fmt17(entry.lambda_ratio_error) << ' '
              << fmt17(entry.position_error) << ' ' << fmt17(entry.rho_error) << '\n';
        }
        dat << "\n\n";

        const bool expect_stable = z.Mprime < 0.0;
        bool all_newton = true, all_position = true, sign_ok = true;
        for (const auto& entry : rep.entries) {
          if (!entry.scaling_ok || !entry.newton_ok) {
            all_newton = false;
            continue;
          }
          if (entry.position_error > cfg.tol.position_agreement) all_position = false;
          if (stability_verdict(entry.fixed_point) != expect_stable) sign_ok = false;
        }
        // position agreement is bound-checked per entry; its log-log slope is
        // solver floor (both routes solve the same computed map), so only the
        // lambda-ratio slope gates the run
        const bool slope_ok = rep.slopes_valid &&
                              rep.slope_lambda >= cfg.tol.slope_threshold;

        json s;
        s["theta0"] = z.theta0;
        s["lambda_star"] = rep.lambda_star;
        s["n_success"] = rep.n_success;
        s["slope_lambda"] = rep.slope_lambda;
        s["slope_position"] = rep.slope_position;
        s["slope_rho"] = rep.slope_rho;
        s["expect_stable"] = expect_stable;
        s["checks"] = {{"newton_converged", all_newton},
                       {"position_agreement", all_position},
                       {"stability_sign", sign_ok},
                       {"slopes", slope_ok}};
        if (!rep.diagnostic.empty()) s["diagnostic"] = rep.diagnostic;
        jrep.push_back(s);

        std::ostringstream tag;
        tag << "theta0=" << z.theta0;
        if (!all_newton) failures.push_back(tag.str() + ": fixed-point Newton failed");
        if (!all_position) failures.push_back(tag.str() + ": position agreement failed");
        if (!sign_ok) failures.push_back(tag.str() + ": stability verdict != sign rule");
        if (!slope_ok) failures.push_back(tag.str() + ": convergence slopes below threshold");
      }

      write_file(out_dir / "convergence_report.csv", csv.str());
      write_file(out_dir / "convergence_report.json", jrep.dump(2));
      write_file(out_dir / "ladder.dat", dat.str());

      if (!failures.empty()) {
        std::string msg = "validate stage checks failed:";
        for (const auto& f : failures) msg += "\n  " + f;
        return {1, msg};
      }
    }

    (void)perron;
    return {0, "ok"};
  } catch (const ConfigError&) {
    throw;  // caller maps to exit 2
  } catch (const std::exception& e) {
    std::ostringstream os;
    os << "stage '" << stage << "' failed: " << e.what();
    return {1, os.str()};
  }
}

}  // namespace vsb
