#include "vsb/poincare.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "vsb/errors.hpp"

namespace vsb {

PoincareOperators::PoincareOperators(VectorFieldPair vf, IntegratorOptions opts)
    : vf_(std::move(vf)), opts_(opts) {
  if (!(vf_.period > 0.0))
    throw ConfigError("PoincareOperators: period must be positive, got " +
                      std::to_string(vf_.period));
}

std::string PoincareOperators::key(const Vec& v, double eps) const {
  char buf[64];
  std::string k;
  k.reserve(32 * (v.size() + 1));
  for (int i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.12e|", v(i));
    k += buf;
  }
  std::snprintf(buf, sizeof(buf), "e%.17e", eps);
  k += buf;
  return k;
}

PoincareOperators::CacheEntry PoincareOperators::snapshot(const std::string& k) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = cache_.find(k);
  return it == cache_.end() ? CacheEntry{} : it->second;
}

template <typename Fn>
void PoincareOperators::update(const std::string& k, Fn&& fn) const {
  std::lock_guard<std::mutex> lock(mutex_);
  fn(cache_[k]);
}

Vec PoincareOperators::map(const Vec& v, double eps) const {
  const std::string k = key(v, eps);
  CacheEntry e = snapshot(k);
  if (e.has_map) return e.map_value;
  Trajectory traj = flow(vf_, 0.0, vf_.period, v, eps, opts_);
  Vec out = traj.states.back();
  update(k, [&](CacheEntry& c) {
    c.has_map = true;
    c.map_value = out;
  });
  return out;
}

std::pair<Vec, Mat> PoincareOperators::map_with_jacobian(const Vec& v, double eps) const {
  const std::string k = key(v, eps);
  CacheEntry e = snapshot(k);
  if (e.has_jac) return {e.aug_map, e.jacobian};
  VariationalFlow vfw = flow_variational(vf_, 0.0, vf_.period, v, eps, 1, opts_);
  Vec x = vfw.final_state();
  Mat Y = vfw.monodromy();
  update(k, [&](CacheEntry& c) {
    c.has_jac = true;
    c.aug_map = x;
    c.jacobian = Y;
  });
  return {x, Y};
}

PoincareOperators::PDerivs PoincareOperators::P_derivatives(const Vec& v) const {
  const std::string k = key(v, 0.0);
  CacheEntry e = snapshot(k);
  PDerivs out;
  if (e.has_second && e.has_jac) {
    out.value = e.aug_map - v;
    out.jacobian = e.jacobian - Mat::Identity(vf_.dim, vf_.dim);
    out.second = e.second;
    return out;
  }
  VariationalFlow vfw = flow_variational(vf_, 0.0, vf_.period, v, 0.0, 2, opts_);
  const Vec x = vfw.final_state();
  const Mat Y = vfw.monodromy();
  const BilinearMap S = vfw.final_second();
  update(k, [&](CacheEntry& c) {
    c.has_jac = true;
    c.aug_map = x;
    c.jacobian = Y;
    c.has_second = true;
    c.second = S;
  });
  out.value = x - v;
  out.jacobian = Y - Mat::Identity(vf_.dim, vf_.dim);
  out.second = S;
  return out;
}

Vec PoincareOperators::Q(const Vec& v, double eps) const {
  if (eps != 0.0) return (map(v, eps) - map(v, 0.0)) / eps;

  const std::string k = key(v, 0.0);
  CacheEntry e = snapshot(k);
  if (e.has_q0) return e.q0;

  const int n = vf_.dim;
  // augmented system [x; Y; y; U]: computes Q(v,0) = y(T) and Q'_v(v,0) = U(T)
  OdeRhs rhs = [this, n](double t, const Vec& s, Vec& ds) {
    ds.resize(s.size());
    const Vec x = s.head(n);
    const Mat J = jacobian_f(vf_, x);
    const Mat Gx = jacobian_g_x(vf_, t, x, 0.0);
    const Vec y = s.segment(n + n * n, n);
    ds.head(n) = vf_.f(x);
    for (int j = 0; j < n; ++j)
      ds.segment(n + j * n, n) = J * s.segment(n + j * n, n);
    ds.segment(n + n * n, n) = J * y + vf_.g(t, x, 0.0);
    const int ub = n + n * n + n;
    for (int j = 0; j < n; ++j) {
      const Vec Yj = s.segment(n + j * n, n);
      ds.segment(ub + j * n, n) =
          J * s.segment(ub + j * n, n) + hessian_f(vf_, x, Yj, y) + Gx * Yj;
    }
  };
  Vec s0 = Vec::Zero(n + n * n + n + n * n);
  s0.head(n) = v;
  for (int j = 0; j < n; ++j) s0(n + j * n + j) = 1.0;
  Trajectory traj = integrate(rhs, 0.0, vf_.period, s0, opts_);
  const Vec sT = traj.states.back();
  Vec q0 = sT.segment(n + n * n, n);
  Mat qv0(n, n);
  const int ub = n + n * n + n;
  for (int j = 0; j < n; ++j) qv0.col(j) = sT.segment(ub + j * n, n);
  update(k, [&](CacheEntry& c) {
    c.has_q0 = true;
    c.q0 = q0;
    c.qv0 = qv0;
  });
  return q0;
}

Mat PoincareOperators::Qprime_v(const Vec& v, double eps) const {
  if (eps != 0.0) {
    const Mat Ye = map_with_jacobian(v, eps).second;
    const Mat Y0 = map_with_jacobian(v, 0.0).second;
    return (Ye - Y0) / eps;
  }
  const std::string k = key(v, 0.0);
  CacheEntry e = snapshot(k);
  if (!e.has_q0) {
    Q(v, 0.0);  // fills q0 and qv0
    e = snapshot(k);
  }
  return e.qv0;
}

Vec PoincareOperators::Qprime_eps(const Vec& v, double fd_step) const {
  auto central = [&](double h) { return ((Q(v, h) - Q(v, -h)) / (2.0 * h)).eval(); };
  const Vec d1 = central(fd_step);
  const Vec d2 = central(0.5 * fd_step);
  return (4.0 * d2 - d1) / 3.0;
}

Vec Q_at_zero(const VectorFieldPair& vf, const LimitCycle& cycle, double theta,
              const IntegratorOptions& opts) {
  auto A = [&vf, &cycle, theta](double t) { return jacobian_f(vf, cycle.x0(t + theta)); };
  auto b = [&vf, &cycle, theta](double t) { return vf.g(t, cycle.x0(t + theta), 0.0); };
  return solve_linear_inhomogeneous(A, b, Vec::Zero(vf.dim), 0.0, vf.period, opts);
}

QDerivs Q_derivatives(const PoincareOperators& ops, const LimitCycle& cycle,
                      double theta) {
  const Vec v = cycle.x0(theta);
  QDerivs out;
  out.Qprime_v = ops.Qprime_v(v, 0.0);
  out.Qprime_eps = ops.Qprime_eps(v);

  // central-FD cross-check of the augmented-ODE Jacobian
  const int n = static_cast<int>(v.size());
  const double h = 1e-6 * std::max(1.0, v.norm());
  Mat fd(n, n);
  Vec vp = v, vm = v;
  for (int j = 0; j < n; ++j) {
    vp(j) = v(j) + h;
    vm(j) = v(j) - h;
    fd.col(j) = (ops.Q(vp, 0.0) - ops.Q(vm, 0.0)) / (2.0 * h);
    vp(j) = v(j);
    vm(j) = v(j);
  }
  out.fd_agreement = (out.Qprime_v - fd).norm();
  if (out.fd_agreement > 1e-4) {
    std::ostringstream os;
    os << "Q'_v augmented-ODE vs finite-difference disagreement " << out.fd_agreement
       << " at theta = " << theta;
    out.warnings.push_back(os.str());
  }
  return out;
}

LocalOperators local_operators(const PoincareOperators& ops, const LimitCycle& cycle,
                               double theta) {
  const Vec v = cycle.x0(theta);
  PoincareOperators::PDerivs pd = ops.P_derivatives(v);
  LocalOperators out;
  out.Pprime = pd.jacobian;
  out.Psecond = pd.second;
  out.Q0 = ops.Q(v, 0.0);
  out.Qprime_v = ops.Qprime_v(v, 0.0);
  return out;
}

AssembledProblem assemble_problem(std::shared_ptr<const PoincareOperators> ops,
                                  const LimitCycle& cycle, const AdjointOrbit& adj,
                                  double theta0, const ScalingOptions& sopts) {
  AssembledProblem out;
  out.theta0 = theta0;
  out.projector = projector_at(cycle, adj, theta0);

  const VectorFieldPair& vf = ops->field();
  AbstractBifProblem p;
  p.dim = vf.dim;
  p.v0 = cycle.x0(theta0);
  p.projector = out.projector.matrix;
  p.P = [ops](const Vec& v) { return ops->P(v); };
  p.Pprime = [ops](const Vec& v) { return ops->P_derivatives(v).jacobian; };
  p.Psecond = [ops](const Vec& v, const Vec& a, const Vec& b) {
    return ops->P_derivatives(v).second.apply(a, b);
  };
  p.Q = [ops](const Vec& v, double eps) { return ops->Q(v, eps); };
  p.Qprime_v = [ops](const Vec& v, double eps) { return ops->Qprime_v(v, eps); };
  p.Qprime_eps = [ops](const Vec& v, double) { return ops->Qprime_eps(v); };
  out.problem = std::move(p);

  out.audit = validate_problem(out.problem, sopts);

  // Curve identity P''(v0) xdot xdot + P'(v0) xddot = 0: the adapter-side
  // verification of the Pi P'' Pi Pi hypothesis.
  {
    const Vec v0 = out.problem.v0;
    PoincareOperators::PDerivs pd = ops->P_derivatives(v0);
    const Vec xdot = cycle.xdot0(theta0);
    const Vec xddot = jacobian_f(vf, v0) * vf.f(v0);
    const double res = (pd.second.apply(xdot, xdot) + pd.jacobian * xddot).norm();
    out.audit.checks.push_back({"curve identity P'' xdot xdot + P' xddot = 0", res,
                                sopts.audit_tol, res <= sopts.audit_tol, false});
    out.audit.pass = out.audit.pass && res <= sopts.audit_tol;
  }

  QDerivs qd = Q_derivatives(*ops, cycle, theta0);
  out.warnings = qd.warnings;

  out.audit.throw_if_failed();
  return out;
}

}  // namespace vsb
