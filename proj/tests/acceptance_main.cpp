// Acceptance suite: one line per criterion, nonzero exit iff any fails.
// All runs use the hopf normal form with cos forcing, cycle based at (1, 0).

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "vsb/cycle.hpp"
#include "vsb/malkin.hpp"
#include "vsb/poincare.hpp"
#include "vsb/scaling.hpp"
#include "vsb/validator.hpp"
#include "vsb/vectorfield.hpp"

using namespace vsb;

namespace {

int g_failures = 0;

void report(int num, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", num, name.c_str(),
              detail.c_str());
  if (!ok) ++g_failures;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

}  // namespace

int main() {
  const double kTwoPi = 2.0 * M_PI;
  VectorFieldPair vf = builtin_problem("hopf-normal-cosforce");
  IntegratorOptions iopts;
  CycleOptions copts;
  ScalingOptions sopts;
  FixedPointOptions fopts;
  const std::vector<double> ladder{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};

  LimitCycle cycle = find_limit_cycle(vf, v2(1, 0), copts, iopts);
  Monodromy mono = monodromy(vf, cycle, iopts);
  AdjointOrbit adj = adjoint_periodic(vf, cycle, mono, copts, iopts);
  auto ops = std::make_shared<const PoincareOperators>(vf, iopts);

  // 1. cycle & spectrum
  {
    const double contracting = std::exp(-4.0 * M_PI);
    double e_unit = 1e99, e_contr = 1e99;
    for (int i = 0; i < 2; ++i) {
      const double m = std::abs(mono.multipliers(i));
      e_unit = std::min(e_unit, std::abs(m - 1.0));
      e_contr = std::min(e_contr, std::abs(m - contracting) / contracting);
    }
    const double perron = perron_check(cycle, adj);
    report(1, "cycle multipliers {1, e^-4pi} and Perron invariant",
           e_unit < 1e-6 && e_contr < 1e-6 && perron < 1e-7,
           "unit err " + fmt(e_unit) + ", contracting rel err " + fmt(e_contr) +
               ", perron " + fmt(perron));
  }

  // 2. Malkin closed form, zeros, derivative both ways
  MalkinProfile profile;
  {
    auto M = [&](double th) { return malkin_M(cycle, adj, vf, th); };
    auto Mp = [&](double th) {
      return malkin_Mprime(local_operators(*ops, cycle, th), cycle, adj, th);
    };
    double closed_form_err = 0.0;
    for (int k = 0; k < 128; ++k) {
      const double th = kTwoPi * k / 128.0;
      closed_form_err = std::max(closed_form_err, std::abs(M(th) + M_PI * std::sin(th)));
    }
    MalkinOptions mopts;
    profile = find_zeros(M, Mp, cycle.period, mopts);
    const bool zeros_ok = profile.zeros.size() == 2 &&
                          std::abs(profile.zeros[0].theta0 - 0.0) < 1e-8 &&
                          std::abs(profile.zeros[1].theta0 - M_PI) < 1e-8;
    const double mp_lemma = Mp(0.0);
    const double h = 1e-4;
    const double mp_fd = (M(h) - M(-h)) / (2.0 * h);
    const bool deriv_ok = std::abs(mp_lemma + M_PI) < 1e-5 &&
                          std::abs(mp_fd + M_PI) < 1e-5 &&
                          std::abs(mp_lemma - mp_fd) < 1e-5;
    report(2, "Malkin closed form, zeros {0, pi}, M'(0) = -pi both routes",
           closed_form_err < 1e-7 && zeros_ok && deriv_ok,
           "max|M + pi sin| " + fmt(closed_form_err) + ", M'(0) lemma " + fmt(mp_lemma) +
               ", fd " + fmt(mp_fd));
  }

  // 3. Lemma 2 oracle on the full grid
  {
    double worst = 0.0;
    for (int k = 0; k < 128; ++k) {
      const double th = kTwoPi * k / 128.0;
      const Vec q = Q_at_zero(vf, cycle, th, iopts);
      worst = std::max(worst, std::abs(malkin_M(cycle, adj, vf, th) -
                                       malkin_M_via_Q(q, adj, th)));
    }
    report(3, "Lemma 2: integral definition vs <Q, z0>", worst < 1e-7,
           "max gap " + fmt(worst));
  }

  // 4. Theorem 1 at theta0 = 0
  AssembledProblem assembled = assemble_problem(ops, cycle, adj, 0.0, sopts);
  ScalingSolution scaling = continue_branch(assembled.problem, ladder, sopts);
  {
    double audit_worst = 0.0;
    bool audit_ok = assembled.audit.pass;
    for (const auto& c : assembled.audit.checks)
      if (!c.lower_bound) audit_worst = std::max(audit_worst, c.residual);
    audit_ok = audit_ok && audit_worst < 1e-5;

    const double psi0 = psi_eval(assembled.problem, scaling.w0, 0.0).norm();
    Eigen::JacobiSVD<Mat> svd(psi_jacobian(assembled.problem, scaling.w0, 0.0));
    const double smin = svd.singularValues().tail(1)(0);

    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> radius(0.0, 2.0);
    bool unique_ok = true;
    for (int k = 0; k < 20; ++k) {
      Vec dir = v2(normal(rng), normal(rng)).normalized();
      Vec w = scaling.w0 + radius(rng) * dir;
      for (int it = 0; it < 80; ++it) {
        const Vec r = psi_eval(assembled.problem, w, 0.0);
        if (r.norm() < 1e-12) break;
        w += psi_jacobian(assembled.problem, w, 0.0).fullPivLu().solve(-r);
      }
      if ((w - scaling.w0).norm() >= 1e-7) unique_ok = false;
    }
    report(4, "Theorem 1: audit, ||Psi(w0,0)||, nonsingular Psi'_w, uniqueness",
           audit_ok && psi0 < 1e-8 && smin > 1e-3 && unique_ok,
           "audit max " + fmt(audit_worst) + ", psi0 " + fmt(psi0) + ", smin " +
               fmt(smin) + (unique_ok ? ", 20/20 starts agree" : ", divergent starts"));
  }

  // 5. Theorem 2 on the ladder
  {
    bool decreasing = true;
    double prev = 1e99;
    std::vector<double> eps_list, err_list;
    for (const auto& rec : scaling.branch) {
      const double err = std::abs(rec.lambda / rec.eps - scaling.lambda_star);
      if (err >= prev) decreasing = false;
      prev = err;
      eps_list.push_back(rec.eps);
      err_list.push_back(err);
    }
    const double slope =
        eps_list.size() >= 3 ? loglog_slope(eps_list, err_list) : 0.0;
    const bool lam_ok = std::abs(scaling.lambda_star + M_PI) < 1e-4;

    bool angle_decreasing = true;
    double prev_angle = 1e99, last_angle = 1e99;
    const Vec tangent = cycle.xdot0(0.0).normalized();
    for (const auto& rec : scaling.branch) {
      const double angle = std::acos(std::min(1.0, std::abs(rec.eigvec.dot(tangent))));
      if (angle > prev_angle + 1e-12) angle_decreasing = false;
      prev_angle = angle;
      last_angle = angle;
    }
    report(5, "Theorem 2: lambda_eps/eps -> lambda* = -pi, eigenvector angle",
           scaling.branch.size() == ladder.size() && decreasing && slope >= 0.8 &&
               lam_ok && angle_decreasing && last_angle < 1e-2,
           "slope " + fmt(slope) + ", lambda* " + fmt(scaling.lambda_star) +
               ", final angle " + fmt(last_angle));
  }

  // 6. Theorem 3: fixed points, multiplier asymptotics, stability both ways
  {
    const Vec v0 = assembled.problem.v0;
    bool newton_ok = true, position_ok = true;
    double rho_gap_at_1e2 = 1e99;
    bool rho_real = true, stable_all = true;
    for (const auto& rec : scaling.branch) {
      BranchPoint bp = newton_fixed_point(*ops, rec.eps, v0 + rec.eps * rec.w, fopts,
                                          cycle.xdot0(0.0));
      if (!bp.converged || bp.iterations > 5) newton_ok = false;
      if ((bp.x_init - v0 - rec.eps * rec.w).norm() > 1e-6 * rec.eps) position_ok = false;
      if (!stability_verdict(bp)) stable_all = false;
      if (rec.eps == 1e-2) {
        rho_real = std::abs(bp.rho.imag()) < 1e-10;
        rho_gap_at_1e2 = std::abs(bp.rho.real() - (1.0 - M_PI * rec.eps));
      }
    }

    AssembledProblem at_pi = assemble_problem(ops, cycle, adj, M_PI, sopts);
    ScalingSolution sc_pi = continue_branch(at_pi.problem, {1e-2}, sopts);
    BranchPoint bp_pi = newton_fixed_point(
        *ops, 1e-2, at_pi.problem.v0 + 1e-2 * sc_pi.branch[0].w, fopts,
        cycle.xdot0(M_PI));
    const bool unstable_ok = !stability_verdict(bp_pi);

    BranchPoint bp_stable = newton_fixed_point(*ops, 1e-2, v0 + 1e-2 * scaling.w0, fopts,
                                               cycle.xdot0(0.0));
    const Vec delta = 1e-3 * v2(1, 1).normalized();
    const double grow_stable = perturbation_growth(*ops, bp_stable, delta, 50);
    const double grow_unstable = perturbation_growth(*ops, bp_pi, delta, 50);
    const bool oracle_ok =
        grow_stable < 0.5 * delta.norm() && grow_unstable > 2.0 * delta.norm();

    report(6, "Theorem 3: Newton <= 5 iters, positions, rho, stability + 50T oracle",
           newton_ok && position_ok && rho_real && rho_gap_at_1e2 <= 0.2 * M_PI * 1e-2 &&
               stable_all && unstable_ok && oracle_ok,
           std::string("rho gap ") + fmt(rho_gap_at_1e2) + ", 50T stable " +
               fmt(grow_stable) + ", unstable " + fmt(grow_unstable));
  }

  // 7. zero-set equivalence at the branch points
  {
    double worst = 0.0;
    for (const auto& rec : scaling.branch) {
      const Vec v = assembled.problem.v0 + rec.eps * rec.w;
      worst = std::max(worst,
                       (ops->P(v) + rec.eps * ops->Q(v, rec.eps)).norm());
    }
    report(7, "zero-set equivalence ||Phi(v0 + eps w_eps, eps)||", worst <= 1e-8,
           "max " + fmt(worst));
  }

  // 8. numerical hygiene: FD agreement and variational orders
  {
    VectorFieldPair fd = vf;
    fd.jac_f = nullptr;
    fd.hess_f = nullptr;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    double jac_err = 0.0, hess_err = 0.0;
    for (int k = 0; k < 50; ++k) {
      const double phi = M_PI * unit(rng);
      const Vec x = v2(std::cos(phi) + 0.3 * unit(rng), std::sin(phi) + 0.3 * unit(rng));
      jac_err = std::max(jac_err,
                         (jacobian_f(vf, x) - jacobian_f(fd, x)).cwiseAbs().maxCoeff());
      const Vec a = v2(unit(rng), unit(rng)), b = v2(unit(rng), unit(rng));
      hess_err = std::max(
          hess_err, (hessian_f(vf, x, a, b) - hessian_f(fd, x, a, b)).cwiseAbs().maxCoeff());
    }

    VectorFieldPair free_vf = builtin_problem("hopf-normal-free");
    const Vec x0 = v2(1.1, 0.2);
    const double t1 = 3.0;
    VariationalFlow vfw = flow_variational(free_vf, 0.0, t1, x0, 0.0, 2, iopts);
    const Vec base = vfw.final_state();
    const Mat Y = vfw.monodromy();
    const Vec dir = v2(0.6, -0.8);
    double e1[2];
    const double m1[2] = {1e-3, 1e-4};
    for (int i = 0; i < 2; ++i) {
      const Vec d = m1[i] * dir;
      e1[i] = (flow(free_vf, 0.0, t1, x0 + d, 0.0, iopts).states.back() - base - Y * d).norm();
    }
    const double order1 = std::log(e1[0] / e1[1]) / std::log(m1[0] / m1[1]);

    const BilinearMap S = vfw.final_second();
    const Vec u = v2(0.8, 0.6);
    const Vec su = S.apply(u, u);
    double e2[2];
    const double m2[2] = {1e-1, 1e-2};
    for (int i = 0; i < 2; ++i) {
      const double h = m2[i];
      const Vec plus = flow(free_vf, 0.0, t1, x0 + h * u, 0.0, iopts).states.back();
      const Vec minus = flow(free_vf, 0.0, t1, x0 - h * u, 0.0, iopts).states.back();
      e2[i] = ((plus - 2.0 * base + minus) / (h * h) - su).norm();
    }
    const double order2 = std::log(e2[0] / e2[1]) / std::log(m2[0] / m2[1]);

    report(8, "hygiene: FD oracles and variational convergence orders",
           jac_err < 1e-6 && hess_err < 1e-4 && order1 >= 1.9 && order2 >= 0.9,
           "jac " + fmt(jac_err) + ", hess " + fmt(hess_err) + ", order1 " +
               fmt(order1) + ", order2 " + fmt(order2));
  }

  if (g_failures == 0)
    std::printf("all criteria passed\n");
  else
    std::printf("%d criteria FAILED\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
