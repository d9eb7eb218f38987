#include "vsb/cycle.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <sstream>

#include "vsb/errors.hpp"

namespace vsb {

Vec PeriodicCurve::at(double th) const {
  const int m = static_cast<int>(theta.size()) - 1;
  double u = std::fmod(th, period);
  if (u < 0.0) u += period;
  const double du = period / m;
  int i = static_cast<int>(u / du);
  if (i >= m) i = m - 1;
  const double h = theta[i + 1] - theta[i];
  const double s = (u - theta[i]) / h;
  if (s == 0.0) return values[i];
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * values[i] + (h10 * h) * derivs[i] + h01 * values[i + 1] +
         (h11 * h) * derivs[i + 1];
}

namespace {

std::vector<double> uniform_grid(double period, int m) {
  std::vector<double> g(m + 1);
  for (int k = 0; k <= m; ++k) g[k] = period * static_cast<double>(k) / m;
  g.back() = period;
  return g;
}

}  // namespace

LimitCycle find_limit_cycle(const VectorFieldPair& vf, const Vec& guess,
                            const CycleOptions& copts, const IntegratorOptions& iopts) {
  const int n = vf.dim;
  if (guess.size() != n) throw ConfigError("find_limit_cycle: guess has wrong dimension");
  if (!(vf.period > 0.0)) throw ConfigError("find_limit_cycle: period must be positive");
  const Vec c = vf.f(guess);
  if (c.norm() < 1e-12)
    throw SingularOperatorError(
        "find_limit_cycle: f(guess) ~ 0, phase condition degenerate (equilibrium?)");

  // The convergence residual and the backtracking merit are both evaluated
  // with the plain flow; the variational flow only supplies the Newton matrix.
  // Mixing the two integration routes in one merit stalls the iteration at the
  // level where their step sequences differ.
  auto plain_residual = [&](const Vec& p) { return (flow(vf, 0.0, vf.period, p, 0.0, iopts).states.back() - p).eval(); };

  std::vector<double> history;
  Vec v = guess;
  for (int iter = 0; iter < copts.max_iter; ++iter) {
    const Vec residual = plain_residual(v);
    const double phase = c.dot(v - guess);
    const double merit = std::sqrt(residual.squaredNorm() + phase * phase);
    history.push_back(residual.norm());
    if (residual.norm() <= copts.cycle_tol && std::abs(phase) <= copts.cycle_tol) {
      LimitCycle cycle;
      cycle.base_point = v;
      cycle.period = vf.period;
      const int m = copts.samples_per_period;
      const auto grid = uniform_grid(vf.period, m);
      Trajectory traj = flow_to_grid(vf, grid, v, 0.0, iopts);
      cycle.x.period = vf.period;
      cycle.xdot.period = vf.period;
      cycle.x.theta = grid;
      cycle.xdot.theta = grid;
      for (double th : grid) {
        // grid points are mesh nodes; at() returns them exactly
        Vec xs = traj.at(th);
        Vec fx = vf.f(xs);
        cycle.x.values.push_back(xs);
        cycle.x.derivs.push_back(fx);
        cycle.xdot.values.push_back(fx);
        cycle.xdot.derivs.push_back(jacobian_f(vf, xs) * fx);
      }
      return cycle;
    }

    VariationalFlow vfw = flow_variational(vf, 0.0, vf.period, v, 0.0, 1, iopts);
    Mat J(n + 1, n);
    J.topRows(n) = vfw.monodromy() - Mat::Identity(n, n);
    J.bottomRows(1) = c.transpose();
    Vec rhs(n + 1);
    rhs.head(n) = -residual;
    rhs(n) = -phase;
    Eigen::ColPivHouseholderQR<Mat> qr(J);
    if (qr.rank() < n)
      throw SingularOperatorError("find_limit_cycle: bordered shooting system is singular");
    Vec step = qr.solve(rhs);

    // backtracking on the merit function
    double alpha = 1.0;
    Vec v_next;
    for (int bt = 0; bt < 10; ++bt) {
      v_next = v + alpha * step;
      const Vec r2 = plain_residual(v_next);
      const double p2 = c.dot(v_next - guess);
      const double m2 = std::sqrt(r2.squaredNorm() + p2 * p2);
      if (m2 < merit || m2 < copts.cycle_tol) break;
      alpha *= 0.5;
    }
    v = v_next;
  }
  std::ostringstream os;
  os << "find_limit_cycle: Newton did not reach tolerance " << copts.cycle_tol << " in "
     << copts.max_iter << " iterations (last residual " << history.back() << ")";
  throw NewtonError(os.str(), history);
}

Monodromy monodromy(const VectorFieldPair& vf, const LimitCycle& cycle,
                    const IntegratorOptions& iopts) {
  VariationalFlow vfw =
      flow_variational(vf, 0.0, cycle.period, cycle.base_point, 0.0, 1, iopts);
  Monodromy mono;
  mono.matrix = vfw.monodromy();
  Eigen::EigenSolver<Mat> es(mono.matrix);
  mono.multipliers = es.eigenvalues();
  return mono;
}

AdjointOrbit adjoint_periodic(const VectorFieldPair& vf, const LimitCycle& cycle,
                              const Monodromy& mono, const CycleOptions& copts,
                              const IntegratorOptions& iopts) {
  const int n = vf.dim;
  int near_unit = 0;
  for (int i = 0; i < mono.multipliers.size(); ++i)
    if (std::abs(mono.multipliers(i) - std::complex<double>(1.0, 0.0)) <
        copts.unit_multiplier_tol)
      ++near_unit;
  if (near_unit != 1)
    throw SingularOperatorError(
        "adjoint_periodic: unit multiplier is not simple (found " +
        std::to_string(near_unit) + " near 1)");

  // Left eigenvector of Y(T) for the multiplier 1, i.e. the unit-multiplier
  // eigenvector of the adjoint monodromy Y(T)^{-T}.
  Eigen::EigenSolver<Mat> es(mono.matrix.transpose());
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double d = std::abs(es.eigenvalues()(i) - std::complex<double>(1.0, 0.0));
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  CVec uc = es.eigenvectors().col(best);
  // simple real eigenvalue -> eigenvector real up to a unit complex factor
  int imax = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(uc(i)) > std::abs(uc(imax))) imax = i;
  Vec u = (uc / (uc(imax) / std::abs(uc(imax)))).real();
  u.normalize();

  // Integrate backward in time from z(T) = u: tau = T - t.
  const int m = copts.samples_per_period;
  const auto grid = uniform_grid(cycle.period, m);
  const double T = cycle.period;
  OdeRhs rhs = [&vf, &cycle, T](double tau, const Vec& z, Vec& dz) {
    dz = jacobian_f(vf, cycle.x0(T - tau)).transpose() * z;
  };
  Trajectory traj = integrate_to_grid(rhs, grid, u, iopts);

  AdjointOrbit adj;
  adj.z.period = T;
  adj.z.theta = grid;
  adj.z.values.resize(m + 1);
  adj.z.derivs.resize(m + 1);
  for (int k = 0; k <= m; ++k) {
    const double th = grid[k];
    Vec z = traj.at(T - th);
    adj.z.values[k] = z;
    adj.z.derivs[k] = -jacobian_f(vf, cycle.x0(th)).transpose() * z;
  }

  const double pairing = cycle.xdot0(0.0).dot(adj.z.values.front());
  if (std::abs(pairing) < 1e-8 * cycle.xdot0(0.0).norm())
    throw NormalizationError(
        "adjoint_periodic: <xdot0(0), z0(0)> ~ 0, Perron normalization impossible");
  for (int k = 0; k <= m; ++k) {
    adj.z.values[k] /= pairing;
    adj.z.derivs[k] /= pairing;
  }
  adj.normalization = cycle.xdot0(0.0).dot(adj.z.values.front());
  return adj;
}

double perron_check(const LimitCycle& cycle, const AdjointOrbit& adj) {
  double worst = 0.0;
  for (std::size_t k = 0; k < adj.z.theta.size(); ++k) {
    const double th = adj.z.theta[k];
    worst = std::max(worst, std::abs(cycle.xdot0(th).dot(adj.z.values[k]) - 1.0));
  }
  return worst;
}

StabilityHypothesis stability_hypothesis_check(const Monodromy& mono,
                                               const CycleOptions& copts) {
  StabilityHypothesis out;
  std::ostringstream os;
  int near_unit = 0;
  bool others_inside = true;
  os << "multipliers:";
  for (int i = 0; i < mono.multipliers.size(); ++i) {
    const std::complex<double> mu = mono.multipliers(i);
    const bool unit = std::abs(mu - std::complex<double>(1.0, 0.0)) < copts.unit_multiplier_tol;
    if (unit) {
      ++near_unit;
      os << " [trivial " << mu << "]";
    } else {
      const bool inside = std::abs(mu) < 1.0 - copts.stability_margin;
      const bool neg_real = (mu - std::complex<double>(1.0, 0.0)).real() < 0.0;
      if (!inside) others_inside = false;
      os << " [" << mu << " |mu|=" << std::abs(mu) << (inside ? " <1" : " >=1")
         << ", Re(mu-1)" << (neg_real ? "<0" : ">=0") << "]";
    }
  }
  out.unit_simple = (near_unit == 1);
  if (near_unit == 0) os << "; no trivial multiplier near 1";
  if (near_unit > 1) os << "; non-simple: " << near_unit << " multipliers near 1";
  out.ok = out.unit_simple && others_inside;
  out.report = os.str();
  return out;
}

}  // namespace vsb
