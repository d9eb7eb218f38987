#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vsb/cycle.hpp"
#include "vsb/linalg.hpp"
#include "vsb/types.hpp"

namespace vsb {

struct RankOneProjector {
  Vec column;  // xdot0(theta)
  Vec row;     // z0(theta)
  Mat matrix;  // column * row^T
};

/// Pi xi = xdot0(theta) <xi, z0(theta)>. Throws NormalizationError when the
/// idempotency defect exceeds 1e-8 (Perron pairing not 1).
RankOneProjector projector_at(const LimitCycle& cycle, const AdjointOrbit& adj,
                              double theta);

/// M(theta) = int_0^T <g(t, x0(t+theta), 0), z0(t+theta)> dt.
/// Composite 8-point Gauss-Legendre with panels aligned to the sample knots of
/// the dense interpolants (exact on their cubic pieces).
double malkin_M(const LimitCycle& cycle, const AdjointOrbit& adj,
                const VectorFieldPair& vf, double theta);

/// Lemma-style representation <Q(x0(theta), 0), z0(theta)>; independent oracle
/// for malkin_M given Q from the Poincare adapter.
double malkin_M_via_Q(const Vec& Q_at_theta, const AdjointOrbit& adj, double theta);

/// Operators of the abstract problem evaluated at one cycle point x0(theta).
struct LocalOperators {
  Mat Pprime;
  BilinearMap Psecond;
  Vec Q0;        // Q(x0(theta), 0)
  Mat Qprime_v;  // Q'_v(x0(theta), 0)
};

/// M'(theta) = < -P''(x0)[h, xdot0] + Q'_v xdot0, z0 >, where h solves the
/// restricted system P'(x0) h = (I-Pi) Q0 on Ker Pi.
double malkin_Mprime(const LocalOperators& ops, const LimitCycle& cycle,
                     const AdjointOrbit& adj, double theta);

struct MalkinZero {
  double theta0 = 0.0;
  double M = 0.0;
  double Mprime = 0.0;
  bool stable_candidate = false;  // M'(theta0) < 0
  bool degenerate = false;        // |M'(theta0)| below degeneracy threshold
  std::string method;             // "lemma3" or "finite-diff"
};

struct MalkinProfile {
  std::vector<double> theta;
  std::vector<double> M;
  std::vector<double> Mprime;
  std::vector<MalkinZero> zeros;
  bool identically_zero = false;
};

struct MalkinOptions {
  int theta_grid = 128;
  double zero_tol = 1e-10;        // refinement target on |M|
  double degeneracy_tol = 1e-6;   // |M'| floor for non-degenerate zeros
  int max_refine_iter = 60;
};

/// Samples M on a uniform grid over [0, T), brackets sign changes, refines by
/// safeguarded Newton (derivative callback when given, secant otherwise).
MalkinProfile find_zeros(const std::function<double(double)>& M,
                         const std::function<double(double)>& Mprime,  // may be empty
                         double period, const MalkinOptions& opts);

}  // namespace vsb
