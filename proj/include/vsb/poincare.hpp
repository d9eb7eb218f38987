#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "vsb/cycle.hpp"
#include "vsb/malkin.hpp"
#include "vsb/ode.hpp"
#include "vsb/scaling.hpp"
#include "vsb/types.hpp"

namespace vsb {

/// Realizes P, Q and their derivatives from the time-T map of the flow.
/// Evaluations are memoized on (v rounded to 12 digits, eps); values are
/// deterministic for fixed tolerances, so concurrent last-write-wins caching
/// is benign.
class PoincareOperators {
 public:
  /// Throws ConfigError when the period is not positive (the time-T map would
  /// degenerate to the identity).
  PoincareOperators(VectorFieldPair vf, IntegratorOptions opts);

  const VectorFieldPair& field() const { return vf_; }
  const IntegratorOptions& integrator_options() const { return opts_; }

  /// P_eps(v) = x(T, v, eps). eps may be negative (smooth extension used by
  /// the eps finite differences).
  Vec map(const Vec& v, double eps) const;

  /// (P_eps(v), (P_eps)'(v)) from one augmented variational integration.
  std::pair<Vec, Mat> map_with_jacobian(const Vec& v, double eps) const;

  Vec P(const Vec& v) const { return map(v, 0.0) - v; }

  struct PDerivs {
    Vec value;           // P(v)
    Mat jacobian;        // P'(v) = Y(T) - I
    BilinearMap second;  // P''(v), second variation at time T
  };
  PDerivs P_derivatives(const Vec& v) const;

  /// Q(v, eps) = (P_eps(v) - P_0(v))/eps for eps != 0; at eps = 0 the limit,
  /// computed as y(T) of y' = f'(x(t)) y + g(t, x(t), 0), y(0) = 0.
  Vec Q(const Vec& v, double eps) const;

  /// Q'_v: exact flow difference (Y_eps - Y_0)/eps for eps != 0; at eps = 0 an
  /// augmented linear ODE per basis direction.
  Mat Qprime_v(const Vec& v, double eps) const;

  /// Q'_eps(v, 0) by central differences in eps with one Richardson step.
  Vec Qprime_eps(const Vec& v, double fd_step = 1e-2) const;

 private:
  struct CacheEntry {
    bool has_map = false;
    Vec map_value;
    bool has_jac = false;
    Vec aug_map;
    Mat jacobian;
    bool has_second = false;
    BilinearMap second;
    bool has_q0 = false;
    Vec q0;
    Mat qv0;
  };

  std::string key(const Vec& v, double eps) const;
  CacheEntry snapshot(const std::string& k) const;
  template <typename Fn>
  void update(const std::string& k, Fn&& fn) const;

  VectorFieldPair vf_;
  IntegratorOptions opts_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, CacheEntry> cache_;
};

/// Q(x0(theta), 0) along the shifted cycle, via the inhomogeneous linear solve
/// y' = f'(x0(t+theta)) y + g(t, x0(t+theta), 0), y(0) = 0.
Vec Q_at_zero(const VectorFieldPair& vf, const LimitCycle& cycle, double theta,
              const IntegratorOptions& opts);

struct QDerivs {
  Mat Qprime_v;
  Vec Qprime_eps;
  double fd_agreement = 0.0;  // || augmented-ODE Q'_v - central-FD Q'_v ||
  std::vector<std::string> warnings;
};

/// Q derivatives at x0(theta) with the finite-difference cross-check of the
/// augmented-ODE route.
QDerivs Q_derivatives(const PoincareOperators& ops, const LimitCycle& cycle,
                      double theta);

/// Operators of the abstract problem at the cycle point x0(theta).
LocalOperators local_operators(const PoincareOperators& ops, const LimitCycle& cycle,
                               double theta);

struct AssembledProblem {
  AbstractBifProblem problem;
  RankOneProjector projector;
  AuditReport audit;
  double theta0 = 0.0;
  std::vector<std::string> warnings;
};

/// Bundles v0 = x0(theta0), the P/Q callbacks and the rank-one projector, and
/// runs the Theorem-1 hypothesis audit (with the Pi P'' Pi Pi hypothesis also
/// checked through the curve identity P''(v0) xdot xdot + P'(v0) xddot = 0).
/// Throws AssemblyError when the audit fails.
AssembledProblem assemble_problem(std::shared_ptr<const PoincareOperators> ops,
                                  const LimitCycle& cycle, const AdjointOrbit& adj,
                                  double theta0, const ScalingOptions& sopts);

}  // namespace vsb
