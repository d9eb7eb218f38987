#include "vsb/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vsb/errors.hpp"

namespace vsb {

namespace {

constexpr double kMachEps = std::numeric_limits<double>::epsilon();

// Dormand-Prince 5(4), FSAL.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

/// Neumaier compensated accumulation: value represented is s + c.
inline void comp_add(double& s, double& c, double v) {
  const double t = s + v;
  if (std::abs(s) >= std::abs(v))
    c += (s - t) + v;
  else
    c += (v - t) + s;
  s = t;
}

bool all_finite(const Vec& v) {
  for (int i = 0; i < v.size(); ++i)
    if (!std::isfinite(v(i))) return false;
  return true;
}

double error_norm(const Vec& err, const Vec& y, const Vec& ynew, double atol,
                  double rtol) {
  double sum = 0.0;
  for (int i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y(i)), std::abs(ynew(i)));
    const double q = err(i) / sc;
    sum += q * q;
  }
  return std::sqrt(sum / static_cast<double>(err.size()));
}

double initial_step(const OdeRhs& rhs, double t0, double t1, const Vec& y0,
                    const Vec& f0, double atol, double rtol) {
  const double span = t1 - t0;
  double d0 = 0.0, d1 = 0.0;
  const int n = static_cast<int>(y0.size());
  for (int i = 0; i < n; ++i) {
    const double sc = atol + rtol * std::abs(y0(i));
    d0 += (y0(i) / sc) * (y0(i) / sc);
    d1 += (f0(i) / sc) * (f0(i) / sc);
  }
  d0 = std::sqrt(d0 / n);
  d1 = std::sqrt(d1 / n);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  if (h0 <= 0.0) return span;
  Vec y1 = y0 + h0 * f0;
  Vec f1(n);
  rhs(t0 + h0, y1, f1);
  double d2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double sc = atol + rtol * std::abs(y0(i));
    const double q = (f1(i) - f0(i)) / sc;
    d2 += q * q;
  }
  d2 = std::sqrt(d2 / n) / h0;
  double h1;
  const double dmax = std::max(d1, d2);
  if (dmax <= 1e-15)
    h1 = std::max(1e-6, h0 * 1e-3);
  else
    h1 = std::pow(0.01 / dmax, 0.2);
  return std::min({100.0 * h0, h1, span});
}

/// Shared adaptive core. `targets` is a strictly increasing list of times the
/// mesh must contain, ending in t1.
///
/// The state is accumulated as a compensated pair (acc, carry); stages see the
/// folded value. This keeps the accumulated sum exact and leaves only per-step
/// ulp perturbations in the dynamics, which matters downstream where Poincare
/// map differences are divided by eps^2.
Trajectory run_rk45(const OdeRhs& rhs, double t0, const std::vector<double>& targets,
                    const Vec& y0, const IntegratorOptions& opts) {
  const double t1 = targets.back();
  const int n = static_cast<int>(y0.size());
  Trajectory traj;

  Vec acc = y0, carry = Vec::Zero(n);
  Vec y = y0;  // folded view acc + carry
  double t = t0;
  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y5(n), errv(n);

  rhs(t0, y, k1);
  if (!all_finite(k1)) throw EvalError("integrate: non-finite right-hand side at t0");
  traj.t.push_back(t0);
  traj.states.push_back(y);
  traj.derivs.push_back(k1);

  double h = opts.h_init > 0.0 ? opts.h_init
                               : initial_step(rhs, t0, t1, y, k1, opts.abs_tol, opts.rel_tol);
  const double safe = 0.9, beta = 0.04, expo1 = 0.2 - beta * 0.75;
  const double fac1 = 0.2, fac2 = 10.0;
  double facold = 1e-4;
  bool last_rejected = false;
  bool nonfinite_seen = false;
  std::size_t target_idx = 0;
  long steps = 0;

  while (t < t1) {
    if (++steps > opts.max_steps)
      throw IntegrationError("integrate: step budget exhausted (stiffness?)", t);
    while (target_idx < targets.size() && targets[target_idx] <= t) ++target_idx;
    const double target = target_idx < targets.size() ? targets[target_idx] : t1;

    const double hmin = 16.0 * kMachEps * std::max(std::abs(t), std::abs(t1));
    bool clamped = false;
    double hstep = h;
    if (t + hstep >= target) {
      hstep = target - t;
      clamped = true;
    }
    if (hstep < hmin) {
      if (clamped && target - t >= 0.0 && target - t < hmin) {
        // Target closer than the minimum step: snap (roundoff-level gap).
        t = target;
        traj.t.push_back(t);
        traj.states.push_back(y);
        traj.derivs.push_back(k1);
        continue;
      }
      if (nonfinite_seen)
        throw IntegrationError("integrate: state blow-up (non-finite values)", t);
      throw IntegrationError("integrate: step size underflow (stiffness)", t);
    }

    ytmp = y + hstep * (a21 * k1);
    rhs(t + c2 * hstep, ytmp, k2);
    ytmp = y + hstep * (a31 * k1 + a32 * k2);
    rhs(t + c3 * hstep, ytmp, k3);
    ytmp = y + hstep * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * hstep, ytmp, k4);
    ytmp = y + hstep * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * hstep, ytmp, k5);
    ytmp = y + hstep * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + hstep, ytmp, k6);
    const Vec delta = hstep * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    y5 = y + delta;
    rhs(t + hstep, y5, k7);

    double err;
    if (!all_finite(y5) || !all_finite(k7)) {
      nonfinite_seen = true;
      err = 10.0;  // force rejection and shrink
    } else {
      errv = hstep * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      err = error_norm(errv, y, y5, opts.abs_tol, opts.rel_tol);
      if (!std::isfinite(err)) {
        nonfinite_seen = true;
        err = 10.0;
      }
    }

    const double fac11 = std::pow(std::max(err, 1e-30), expo1);
    if (err <= 1.0) {
      for (int i = 0; i < n; ++i) comp_add(acc(i), carry(i), delta(i));
      y = acc + carry;
      t = clamped ? target : t + hstep;
      rhs(t, y, k1);  // FSAL re-anchored at the folded state
      traj.t.push_back(t);
      traj.states.push_back(y);
      traj.derivs.push_back(k1);

      facold = std::max(err, 1e-4);
      double fac = fac11 / std::pow(facold, beta);
      fac = std::max(1.0 / fac2, std::min(1.0 / fac1, fac / safe));
      double hnew = h / fac;
      if (last_rejected) hnew = std::min(hnew, h);
      h = hnew;
      last_rejected = false;
    } else {
      h = hstep / std::min(1.0 / fac1, fac11 / safe);
      last_rejected = true;
    }
  }
  return traj;
}

Trajectory run_rk4_fixed(const OdeRhs& rhs, double t0,
                         const std::vector<double>& targets, const Vec& y0,
                         const IntegratorOptions& opts) {
  const double t1 = targets.back();
  const double total = t1 - t0;
  const int n = static_cast<int>(y0.size());
  Trajectory traj;
  Vec y = y0;
  Vec k1(n), k2(n), k3(n), k4(n), ytmp(n);

  rhs(t0, y, k1);
  traj.t.push_back(t0);
  traj.states.push_back(y);
  traj.derivs.push_back(k1);

  double seg_start = t0;
  for (double target : targets) {
    const double len = target - seg_start;
    if (len <= 0.0) continue;
    const long m = std::max<long>(1, std::lround(opts.rk4_steps * len / total));
    const double h = len / static_cast<double>(m);
    for (long j = 0; j < m; ++j) {
      const double tj = seg_start + h * static_cast<double>(j);
      rhs(tj, y, k1);
      ytmp = y + (0.5 * h) * k1;
      rhs(tj + 0.5 * h, ytmp, k2);
      ytmp = y + (0.5 * h) * k2;
      rhs(tj + 0.5 * h, ytmp, k3);
      ytmp = y + h * k3;
      rhs(tj + h, ytmp, k4);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!all_finite(y))
        throw IntegrationError("integrate: state blow-up (non-finite values)", tj);
      const double tnext = (j + 1 == m) ? target : seg_start + h * static_cast<double>(j + 1);
      rhs(tnext, y, k1);
      traj.t.push_back(tnext);
      traj.states.push_back(y);
      traj.derivs.push_back(k1);
    }
    seg_start = target;
  }
  return traj;
}

Trajectory run(const OdeRhs& rhs, double t0, const std::vector<double>& targets,
               const Vec& y0, const IntegratorOptions& opts) {
  if (!all_finite(y0)) throw EvalError("integrate: non-finite initial state");
  if (targets.empty() || targets.back() <= t0) {
    Trajectory traj;
    Vec f0(y0.size());
    rhs(t0, y0, f0);
    traj.t.push_back(t0);
    traj.states.push_back(y0);
    traj.derivs.push_back(f0);
    return traj;
  }
  if (opts.method == OdeMethod::rk4_fixed) return run_rk4_fixed(rhs, t0, targets, y0, opts);
  return run_rk45(rhs, t0, targets, y0, opts);
}

}  // namespace

Vec Trajectory::at(double time) const {
  if (t.size() == 1) {
    if (std::abs(time - t.front()) > 1e-12 * std::max(1.0, std::abs(t.front())))
      throw EvalError("Trajectory::at: time outside single-point trajectory");
    return states.front();
  }
  const double lo = t.front(), hi = t.back();
  const double slack = 1e-10 * std::max(1.0, hi - lo);
  if (time < lo - slack || time > hi + slack)
    throw EvalError("Trajectory::at: time outside trajectory range");
  time = std::clamp(time, lo, hi);
  auto it = std::upper_bound(t.begin(), t.end(), time);
  std::size_t i = (it == t.begin()) ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
  if (i >= t.size() - 1) i = t.size() - 2;
  const double h = t[i + 1] - t[i];
  const double s = (time - t[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * states[i] + (h10 * h) * derivs[i] + h01 * states[i + 1] +
         (h11 * h) * derivs[i + 1];
}

Trajectory integrate(const OdeRhs& rhs, double t0, double t1, const Vec& y0,
                     const IntegratorOptions& opts) {
  if (t1 < t0) throw ConfigError("integrate: t1 < t0");
  return run(rhs, t0, {t1}, y0, opts);
}

Trajectory integrate_to_grid(const OdeRhs& rhs, const std::vector<double>& grid,
                             const Vec& y0, const IntegratorOptions& opts) {
  if (grid.size() < 2) throw ConfigError("integrate_to_grid: need at least two grid points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw ConfigError("integrate_to_grid: grid must be strictly increasing");
  std::vector<double> targets(grid.begin() + 1, grid.end());
  return run(rhs, grid.front(), targets, y0, opts);
}

namespace {

OdeRhs field_rhs(const VectorFieldPair& vf, double eps) {
  return [&vf, eps](double t, const Vec& y, Vec& dydt) {
    dydt = vf.f(y);
    if (eps != 0.0) dydt += eps * vf.g(t, y, eps);
  };
}

}  // namespace

Trajectory flow(const VectorFieldPair& vf, double t0, double t1, const Vec& x_init,
                double eps, const IntegratorOptions& opts) {
  if (t1 < t0) throw ConfigError("flow: t1 < t0");
  if (std::abs(eps) > 1.0) throw ConfigError("flow: |eps| must be <= 1");
  if (x_init.size() != vf.dim) throw ConfigError("flow: initial state has wrong dimension");
  return run(field_rhs(vf, eps), t0, {t1}, x_init, opts);
}

Trajectory flow_to_grid(const VectorFieldPair& vf, const std::vector<double>& grid,
                        const Vec& x_init, double eps, const IntegratorOptions& opts) {
  if (std::abs(eps) > 1.0) throw ConfigError("flow: |eps| must be <= 1");
  return integrate_to_grid(field_rhs(vf, eps), grid, x_init, opts);
}

Vec VariationalFlow::unpack_state(const Vec& p) const { return p.head(n); }

Mat VariationalFlow::unpack_fundamental(const Vec& p) const {
  Mat Y(n, n);
  for (int j = 0; j < n; ++j) Y.col(j) = p.segment(n + j * n, n);
  return Y;
}

BilinearMap VariationalFlow::unpack_second(const Vec& p) const {
  if (order < 2) throw CapabilityError("second variation was not integrated (order 1)");
  BilinearMap b = BilinearMap::zero(n);
  const int base = n + n * n;
  for (int col = 0; col < n * n; ++col) b.flat.col(col) = p.segment(base + col * n, n);
  // Symmetrize: the continuum object is symmetric, integration is done per pair.
  b.flat = 0.5 * (b.flat + [&] {
            Mat m(n, n * n);
            for (int j = 0; j < n; ++j)
              for (int k = 0; k < n; ++k) m.col(j * n + k) = b.flat.col(k * n + j);
            return m;
          }());
  return b;
}

Vec VariationalFlow::state_at(double time) const { return unpack_state(packed.at(time)); }
Mat VariationalFlow::fundamental_at(double time) const {
  return unpack_fundamental(packed.at(time));
}
BilinearMap VariationalFlow::second_at(double time) const {
  return unpack_second(packed.at(time));
}

VariationalFlow flow_variational(const VectorFieldPair& vf, double t0, double t1,
                                 const Vec& x_init, double eps, int order,
                                 const IntegratorOptions& opts) {
  if (t1 < t0) throw ConfigError("flow_variational: t1 < t0");
  if (order != 1 && order != 2) throw ConfigError("flow_variational: order must be 1 or 2");
  if (order == 2 && eps != 0.0)
    throw CapabilityError(
        "flow_variational: second variation needs eps = 0 (no g Hessian oracle)");
  if (x_init.size() != vf.dim)
    throw ConfigError("flow_variational: initial state has wrong dimension");

  const int n = vf.dim;
  const int dim = (order == 1) ? n + n * n : n + n * n + n * n * n;
  Vec y0 = Vec::Zero(dim);
  y0.head(n) = x_init;
  for (int j = 0; j < n; ++j) y0(n + j * n + j) = 1.0;  // Y(t0) = I

  OdeRhs rhs = [&vf, eps, n, order](double t, const Vec& y, Vec& dydt) {
    dydt.resize(y.size());
    const Vec x = y.head(n);
    Vec fx = vf.f(x);
    if (eps != 0.0) fx += eps * vf.g(t, x, eps);
    dydt.head(n) = fx;
    Mat J = jacobian_f(vf, x);
    if (eps != 0.0) J += eps * jacobian_g_x(vf, t, x, eps);
    for (int j = 0; j < n; ++j)
      dydt.segment(n + j * n, n) = J * y.segment(n + j * n, n);
    if (order == 2) {
      const int base = n + n * n;
      for (int j = 0; j < n; ++j) {
        const Vec Yj = y.segment(n + j * n, n);
        for (int k = 0; k < n; ++k) {
          const Vec Yk = y.segment(n + k * n, n);
          const int col = j * n + k;
          dydt.segment(base + col * n, n) =
              J * y.segment(base + col * n, n) + hessian_f(vf, x, Yj, Yk);
        }
      }
    }
  };

  VariationalFlow out;
  out.n = n;
  out.order = order;
  out.packed = run(rhs, t0, {t1}, y0, opts);
  return out;
}

Vec solve_linear_inhomogeneous(const std::function<Mat(double)>& A,
                               const std::function<Vec(double)>& b, const Vec& y_init,
                               double t0, double t1, const IntegratorOptions& opts) {
  if (t1 < t0) throw ConfigError("solve_linear_inhomogeneous: t1 < t0");
  OdeRhs rhs = [&A, &b](double t, const Vec& y, Vec& dydt) { dydt = A(t) * y + b(t); };
  return run(rhs, t0, {t1}, y_init, opts).states.back();
}

}  // namespace vsb
