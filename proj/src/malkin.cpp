#include "vsb/malkin.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vsb/errors.hpp"

namespace vsb {

namespace {

// 8-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr double kGlNode[4] = {0.1834346424956498, 0.5255324099163290,
                               0.7966664774136267, 0.9602898564975363};
constexpr double kGlWeight[4] = {0.3626837833783620, 0.3137066458778873,
                                 0.2223810344533745, 0.1012285362903763};

double gl8_panel(const std::function<double(double)>& fn, double a, double b) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    sum += kGlWeight[i] * (fn(mid + half * kGlNode[i]) + fn(mid - half * kGlNode[i]));
  }
  return half * sum;
}

}  // namespace

RankOneProjector projector_at(const LimitCycle& cycle, const AdjointOrbit& adj,
                              double theta) {
  RankOneProjector p;
  p.column = cycle.xdot0(theta);
  p.row = adj.z0(theta);
  const double pairing = p.column.dot(p.row);
  if (std::abs(pairing - 1.0) > 1e-8) {
    std::ostringstream os;
    os << "projector_at: Perron pairing <xdot0, z0> = " << pairing
       << " != 1 at theta = " << theta << " (adjoint not Perron-normalized)";
    throw NormalizationError(os.str());
  }
  // divide out the residual pairing drift so the projector is idempotent
  p.row /= pairing;
  p.matrix = p.column * p.row.transpose();
  return p;
}

double malkin_M(const LimitCycle& cycle, const AdjointOrbit& adj,
                const VectorFieldPair& vf, double theta) {
  const double T = cycle.period;
  const int m = cycle.grid_size();
  const double du = T / m;
  // Integrate in u = t + theta over [theta, theta + T] with panel boundaries on
  // the interpolation knots (multiples of du); the interpolants are evaluated
  // periodically, g is evaluated at t = u - theta.
  auto integrand = [&](double u) {
    return vf.g(u - theta, cycle.x0(u), 0.0).dot(adj.z0(u));
  };
  double sum = 0.0;
  const double lo = theta, hi = theta + T;
  double a = lo;
  double knot = std::ceil(lo / du) * du;
  if (knot <= a + 1e-15 * T) knot += du;
  while (knot < hi) {
    sum += gl8_panel(integrand, a, knot);
    a = knot;
    knot += du;
  }
  sum += gl8_panel(integrand, a, hi);
  return sum;
}

double malkin_M_via_Q(const Vec& Q_at_theta, const AdjointOrbit& adj, double theta) {
  return Q_at_theta.dot(adj.z0(theta));
}

double malkin_Mprime(const LocalOperators& ops, const LimitCycle& cycle,
                     const AdjointOrbit& adj, double theta) {
  const Vec xdot = cycle.xdot0(theta);
  const Vec z = adj.z0(theta);
  const Mat projector = xdot * z.transpose();
  const Vec h = restricted_solve(ops.Pprime, projector, ops.Q0);
  const Vec lhs = -ops.Psecond.apply(h, xdot) + ops.Qprime_v * xdot;
  return lhs.dot(z);
}

MalkinProfile find_zeros(const std::function<double(double)>& M,
                         const std::function<double(double)>& Mprime,
                         double period, const MalkinOptions& opts) {
  if (opts.theta_grid < 16) throw ConfigError("find_zeros: theta_grid must be >= 16");
  MalkinProfile profile;
  const int m = opts.theta_grid;

  auto mprime_eval = [&](double th) -> double {
    if (Mprime) return Mprime(th);
    const double h = 1e-5 * period;
    return (M(th + h) - M(th - h)) / (2.0 * h);
  };
  const std::string method = Mprime ? "lemma3" : "finite-diff";

  double max_abs = 0.0;
  for (int k = 0; k < m; ++k) {
    const double th = period * static_cast<double>(k) / m;
    profile.theta.push_back(th);
    profile.M.push_back(M(th));
    max_abs = std::max(max_abs, std::abs(profile.M.back()));
  }
  for (int k = 0; k < m; ++k) profile.Mprime.push_back(mprime_eval(profile.theta[k]));

  if (max_abs <= opts.zero_tol) {
    profile.identically_zero = true;  // g == 0 or orthogonal forcing: inapplicable
    return profile;
  }

  // Bracket sign changes on the periodic closure of the grid.
  for (int k = 0; k < m; ++k) {
    const double a = profile.theta[k];
    const double b = (k + 1 < m) ? profile.theta[k + 1] : period;
    const double fa = profile.M[k];
    const double fb = (k + 1 < m) ? profile.M[k + 1] : profile.M[0];
    if (fa == 0.0) {
      // grid point is an exact zero; handled by refinement from a itself
    } else if (fa * fb > 0.0) {
      continue;
    }

    // Safeguarded Newton within [a, b].
    double lo = a, hi = b, flo = fa, fhi = fb;
    double th = (std::abs(flo) < std::abs(fhi)) ? lo : hi;
    double fth = (std::abs(flo) < std::abs(fhi)) ? flo : fhi;
    for (int it = 0; it < opts.max_refine_iter && std::abs(fth) > opts.zero_tol; ++it) {
      const double d = mprime_eval(th);
      double next;
      if (d != 0.0) {
        next = th - fth / d;
        if (next <= lo || next >= hi) next = 0.5 * (lo + hi);  // bisection safeguard
      } else {
        next = 0.5 * (lo + hi);
      }
      const double fnext = M(next);
      if (flo * fnext <= 0.0) {
        hi = next;
        fhi = fnext;
      } else {
        lo = next;
        flo = fnext;
      }
      th = next;
      fth = fnext;
    }

    MalkinZero zero;
    zero.theta0 = std::fmod(th, period);
    if (zero.theta0 < 0.0) zero.theta0 += period;
    if (period - zero.theta0 < 1e-9 * (1.0 + period)) zero.theta0 = 0.0;  // wrap T- to 0
    zero.M = fth;
    zero.Mprime = mprime_eval(th);
    zero.method = method;
    zero.degenerate = std::abs(zero.Mprime) < opts.degeneracy_tol;
    zero.stable_candidate = !zero.degenerate && zero.Mprime < 0.0;

    // Skip duplicates (a zero sitting exactly on a grid node brackets twice).
    bool dup = false;
    for (const auto& z : profile.zeros) {
      double gap = std::abs(z.theta0 - zero.theta0);
      gap = std::min(gap, period - gap);
      if (gap < 1e-6 * period) dup = true;
    }
    if (!dup && std::abs(fth) <= opts.zero_tol) profile.zeros.push_back(zero);
  }

  std::sort(profile.zeros.begin(), profile.zeros.end(),
            [](const MalkinZero& a, const MalkinZero& b) { return a.theta0 < b.theta0; });
  return profile;
}

}  // namespace vsb
