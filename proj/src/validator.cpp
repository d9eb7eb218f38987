#include "vsb/validator.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "vsb/errors.hpp"

namespace vsb {

BranchPoint newton_fixed_point(const PoincareOperators& ops, double eps,
                               const Vec& start, const FixedPointOptions& opts,
                               const Vec& tangent_ref) {
  BranchPoint bp;
  bp.eps = eps;
  Vec v = start;
  Vec F = ops.map(v, eps) - v;
  double res = F.norm();
  bp.iterations = 0;

  const int n = static_cast<int>(start.size());
  for (int it = 0; it < opts.max_iter && res > opts.tol; ++it) {
    const Mat Y = ops.map_with_jacobian(v, eps).second;
    const Mat J = Y - Mat::Identity(n, n);
    Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smin = svd.singularValues().tail(1)(0);
    if (smin < opts.singular_floor) {
      std::ostringstream os;
      os << "newton_fixed_point: Jacobian (P_eps)' - I is singular to working precision "
            "(smallest singular value "
         << smin << "); near-resonance, the bordered cycle solver applies at eps = 0";
      throw SingularOperatorError(os.str());
    }
    const Vec step = svd.solve(-F);

    double alpha = 1.0;
    Vec v_next = v + step;
    Vec F_next = ops.map(v_next, eps) - v_next;
    for (int bt = 0; bt < 8 && F_next.norm() > res; ++bt) {
      alpha *= 0.5;
      v_next = v + alpha * step;
      F_next = ops.map(v_next, eps) - v_next;
    }
    v = v_next;
    F = F_next;
    res = F.norm();
    bp.iterations = it + 1;
  }

  bp.x_init = v;
  bp.residual = res;
  bp.converged = res <= opts.tol;

  const Mat Y = ops.map_with_jacobian(v, eps).second;
  Eigen::EigenSolver<Mat> es(Y);
  bp.multipliers = es.eigenvalues();
  bp.stable = true;
  for (int i = 0; i < n; ++i)
    if (std::abs(bp.multipliers(i)) >= 1.0) bp.stable = false;

  // rho: continuation of the trivial multiplier, selected by eigenvector
  // overlap with the cycle tangent when available, else nearest to 1.
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double score;
    if (tangent_ref.size() > 0) {
      score = std::abs(es.eigenvectors().col(i).dot(
          (tangent_ref / tangent_ref.norm()).cast<std::complex<double>>()));
    } else {
      score = -std::abs(bp.multipliers(i) - std::complex<double>(1.0, 0.0));
    }
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  bp.rho = bp.multipliers(best);
  return bp;
}

bool stability_verdict(const BranchPoint& bp) {
  for (int i = 0; i < bp.multipliers.size(); ++i)
    if (std::abs(bp.multipliers(i)) >= 1.0) return false;
  return true;
}

double loglog_slope(const std::vector<double>& eps, const std::vector<double>& err) {
  const int n = static_cast<int>(eps.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = std::log(eps[i]);
    const double y = std::log(std::max(err[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double perturbation_growth(const PoincareOperators& ops, const BranchPoint& bp,
                           const Vec& delta, int n_periods) {
  Vec v = bp.x_init + delta;
  for (int k = 0; k < n_periods; ++k) v = ops.map(v, bp.eps);
  return (v - bp.x_init).norm();
}

ConvergenceReport ladder_study(std::shared_ptr<const PoincareOperators> ops,
                               const LimitCycle& cycle, const AdjointOrbit& adj,
                               double theta0, const std::vector<double>& eps_ladder,
                               const LadderOptions& opts) {
  ConvergenceReport report;
  report.theta0 = theta0;

  AssembledProblem assembled =
      assemble_problem(ops, cycle, adj, theta0, opts.scaling);
  report.scaling = continue_branch(assembled.problem, eps_ladder, opts.scaling);
  report.diagnostic = report.scaling.branch_diagnostic;
  report.lambda_star = report.scaling.lambda_star;

  const Vec v0 = assembled.problem.v0;
  const Vec tangent = assembled.projector.column;
  const Vec tangent_unit = tangent / tangent.norm();

  std::vector<double> ok_eps, ok_lambda, ok_pos, ok_rho;
  for (double eps : eps_ladder) {
    LadderEntry entry;
    entry.eps = eps;
    const BranchRecord* rec = nullptr;
    for (const auto& r : report.scaling.branch)
      if (r.eps == eps) rec = &r;
    if (rec == nullptr) {
      report.entries.push_back(entry);
      continue;
    }
    entry.scaling_ok = true;
    entry.branch = *rec;
    entry.lambda_ratio_error = std::abs(rec->lambda / eps - report.lambda_star);
    entry.eigvec_angle =
        std::acos(std::min(1.0, std::abs(rec->eigvec.dot(tangent_unit))));

    try {
      const Vec prediction = v0 + eps * rec->w;
      entry.fixed_point =
          newton_fixed_point(*ops, eps, prediction, opts.fixed_point, tangent);
      entry.newton_ok = entry.fixed_point.converged;
    } catch (const SingularOperatorError&) {
      entry.newton_ok = false;
    }

    if (entry.newton_ok) {
      entry.position_error =
          (entry.fixed_point.x_init - v0 - eps * rec->w).norm() / eps;
      entry.rho_error =
          std::abs(entry.fixed_point.rho -
                   std::complex<double>(1.0 + eps * report.lambda_star, 0.0)) /
          eps;

      // uniform convergence probe: max_t ||x_eps(t) - x0(t + theta0)||
      const int m = opts.uniform_probe_points;
      std::vector<double> grid(m + 1);
      for (int k = 0; k <= m; ++k)
        grid[k] = cycle.period * static_cast<double>(k) / m;
      Trajectory traj = flow_to_grid(ops->field(), grid, entry.fixed_point.x_init, eps,
                                     ops->integrator_options());
      double worst = 0.0;
      for (int k = 0; k <= m; ++k)
        worst = std::max(worst, (traj.at(grid[k]) - cycle.x0(grid[k] + theta0)).norm());
      entry.uniform_C = worst / eps;

      ok_eps.push_back(eps);
      ok_lambda.push_back(entry.lambda_ratio_error);
      ok_pos.push_back(entry.position_error);
      ok_rho.push_back(entry.rho_error);
    }
    report.entries.push_back(std::move(entry));
  }

  report.n_success = static_cast<int>(ok_eps.size());
  if (report.n_success >= 3) {
    report.slopes_valid = true;
    report.slope_lambda = loglog_slope(ok_eps, ok_lambda);
    report.slope_position = loglog_slope(ok_eps, ok_pos);
    report.slope_rho = loglog_slope(ok_eps, ok_rho);
  }
  return report;
}

}  // namespace vsb
