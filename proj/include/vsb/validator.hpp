#pragma once

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "vsb/cycle.hpp"
#include "vsb/poincare.hpp"
#include "vsb/scaling.hpp"
#include "vsb/types.hpp"

namespace vsb {

struct BranchPoint {
  double eps = 0.0;
  Vec x_init;                       // x_eps(0)
  double residual = 0.0;            // ||P_eps(x_init) - x_init||
  bool converged = false;
  int iterations = 0;
  std::complex<double> rho{0.0, 0.0};  // multiplier continuing the trivial one
  CVec multipliers;
  bool stable = false;  // all multipliers strictly inside the unit circle
};

struct FixedPointOptions {
  double tol = 1e-11;
  int max_iter = 20;
  double singular_floor = 1e-7;  // smallest singular value of (P_eps)' - I
};

/// Newton for P_eps(v) = v with the variational Jacobian. The residual is
/// evaluated with the plain flow so that both solution routes (this one and
/// the scaled Newton) target the same computed map. Non-convergence returns
/// the best iterate; a singular Jacobian throws (near-resonance, or eps = 0
/// where the bordered cycle solver must be used instead).
BranchPoint newton_fixed_point(const PoincareOperators& ops, double eps,
                               const Vec& start, const FixedPointOptions& opts,
                               const Vec& tangent_ref = Vec());

/// True iff every multiplier of (P_eps)'(x_eps(0)) has modulus < 1.
bool stability_verdict(const BranchPoint& bp);

struct LadderEntry {
  double eps = 0.0;
  bool scaling_ok = false;
  bool newton_ok = false;
  double lambda_ratio_error = 0.0;  // |lambda_eps/eps - lambda*|
  double position_error = 0.0;      // ||x_eps(0) - v0 - eps w_eps|| / eps
  double rho_error = 0.0;           // |rho_eps - 1 - eps lambda*| / eps
  double uniform_C = 0.0;           // max_t ||x_eps(t) - x0(t+theta0)|| / eps
  double eigvec_angle = 0.0;        // angle(l_eps, xdot0(theta0))
  BranchRecord branch;
  BranchPoint fixed_point;
};

struct ConvergenceReport {
  double theta0 = 0.0;
  double lambda_star = 0.0;
  std::vector<LadderEntry> entries;  // ladder order (decreasing eps)
  int n_success = 0;
  double slope_lambda = 0.0;
  double slope_position = 0.0;
  double slope_rho = 0.0;
  bool slopes_valid = false;  // at least 3 successful entries
  ScalingSolution scaling;
  std::string diagnostic;
};

struct LadderOptions {
  ScalingOptions scaling;
  FixedPointOptions fixed_point;
  int uniform_probe_points = 256;
};

/// Full Theorem-2/3 convergence study at one Malkin zero: scaled branch,
/// independent Newton fixed points, error metrics and log-log slopes.
ConvergenceReport ladder_study(std::shared_ptr<const PoincareOperators> ops,
                               const LimitCycle& cycle, const AdjointOrbit& adj,
                               double theta0, const std::vector<double>& eps_ladder,
                               const LadderOptions& opts);

/// Integrate from x_eps(0) + delta for n_periods periods and report the
/// distance to x_eps(0) at the final period boundary (long-run stability probe).
double perturbation_growth(const PoincareOperators& ops, const BranchPoint& bp,
                           const Vec& delta, int n_periods);

/// Least-squares slope of log(err) against log(eps).
double loglog_slope(const std::vector<double>& eps, const std::vector<double>& err);

}  // namespace vsb
