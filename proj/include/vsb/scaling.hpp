#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vsb/linalg.hpp"
#include "vsb/types.hpp"

namespace vsb {

/// Callback bundle for the abstract singular bifurcation equation
/// Phi(v, eps) = P(v) + eps Q(v, eps) near a singular zero v0 of P, together
/// with the invariant projector Pi.
struct AbstractBifProblem {
  int dim = 0;
  Vec v0;
  std::function<Vec(const Vec&)> P;
  std::function<Mat(const Vec&)> Pprime;
  std::function<Vec(const Vec&, const Vec&, const Vec&)> Psecond;  // P''(v)[a,b]
  std::function<Vec(const Vec&, double)> Q;
  std::function<Mat(const Vec&, double)> Qprime_v;
  std::function<Vec(const Vec&, double)> Qprime_eps;
  Mat projector;
};

struct HypothesisCheck {
  std::string name;
  double residual = 0.0;   // for invertibility checks: the smallest singular value
  double threshold = 0.0;
  bool pass = false;
  bool lower_bound = false;  // pass means residual >= threshold
};

struct AuditReport {
  std::vector<HypothesisCheck> checks;
  bool pass = false;
  void throw_if_failed() const;  // AssemblyError naming the first violation
};

struct ScalingOptions {
  double newton_tol = 1e-10;
  int newton_max_iter = 25;
  double audit_tol = 1e-5;
  double invertibility_floor = 1e-6;
  // Branch Newton acceptance floor: Psi amplifies evaluation roundoff of Phi by
  // 1/eps^2, so residuals below ~eps_machine/eps^2 are not attainable. A point
  // is accepted when the residual is under max(newton_tol, guard*eps_mach/eps^2).
  double noise_guard = 100.0;
  int riesz_points = 64;
  double riesz_band = 0.02;  // forbidden annulus around the contour, fraction of radius
  unsigned seed = 12345;
  int audit_pairs = 8;
};

struct BranchRecord {
  double eps = 0.0;
  Vec w;
  double psi_residual = 0.0;
  int newton_iters = 0;
  bool at_noise_floor = false;
  double lambda = 0.0;  // eigenvalue of Phi'_v(v0 + eps w, eps) nearest zero
  Vec eigvec;           // unit eigenvector (real part if complex pair)
  bool lambda_complex_pair = false;
};

struct ScalingSolution {
  Vec w1;  // in (I-Pi)R^n
  Vec w2;  // in Pi R^n
  Vec w0;  // w1 + w2
  double psi0_residual = 0.0;
  double lambda_star = 0.0;
  bool has_lambda_star = false;
  std::vector<BranchRecord> branch;   // ordered as the given ladder (decreasing eps)
  std::string branch_diagnostic;      // non-empty when the branch was truncated
};

/// Spectral projector (1/2 pi i) oint (lambda I - A)^{-1} d lambda over the
/// circle |lambda| = radius, by trapezoidal contour quadrature on N points.
/// Requires exactly one eigenvalue (the near-zero one) strictly inside and
/// none within the band around the contour.
Mat riesz_projector(const Mat& A, double radius, const ScalingOptions& opts = {});

/// Theorem-1 hypothesis audit: P(v0) = 0, Pi P'(v0) = 0, Pi Q(v0,0) = 0,
/// invertibility of P'(v0) on Ker Pi, Pi P''(v0) Pi r Pi s = 0, and the
/// invertibility of the W2 operator (INV) on Im Pi.
AuditReport validate_problem(const AbstractBifProblem& problem,
                             const ScalingOptions& opts = {});

/// w1 = -(P'(v0)|_{Ker Pi})^{-1} (I-Pi) Q(v0, 0), solved by deflation.
Vec solve_w1(const AbstractBifProblem& problem);

/// Unique solution in Im Pi of
/// [Pi P''(v0) w1 + Pi Q'_v(v0,0)] w2 = -1/2 Pi P''(v0) w1 w1 - Pi Q'_v(v0,0) w1
///                                      - Pi Q'_eps(v0,0).
Vec solve_w2(const AbstractBifProblem& problem, const Vec& w1);

/// Runs the audit, solves the two stages and verifies ||Psi(w0,0)|| <= 1e-8.
ScalingSolution compute_w0(const AbstractBifProblem& problem,
                           const ScalingOptions& opts = {});

/// eps = 0: closed form
///   Psi(w,0) = 1/2 Pi P''(v0) w w + Pi Q'_v(v0,0) w + Pi Q'_eps(v0,0)
///              + (I-Pi) P'(v0) w + (I-Pi) Q(v0,0);
/// eps > 0: Psi(w,eps) = (1/eps) [Phi - Pi Phi + (1/eps) Pi Phi] at v0 + eps w.
Vec psi_eval(const AbstractBifProblem& problem, const Vec& w, double eps);

/// eps = 0: Pi P''(v0) w + Pi Q'_v(v0,0) + (I-Pi) P'(v0);
/// eps > 0: (I-Pi) Phi'_v + (1/eps) Pi Phi'_v with Phi'_v = P' + eps Q'_v.
Mat psi_jacobian(const AbstractBifProblem& problem, const Vec& w, double eps);

struct EigenTrack {
  double lambda = 0.0;
  Vec eigvec;
  bool complex_pair = false;
};

/// Eigenvalue of Phi'_v(v0 + eps w, eps) of smallest modulus; ties broken by
/// eigenvector overlap with `left` when provided.
EigenTrack lambda_epsilon(const AbstractBifProblem& problem, double eps, const Vec& w,
                          const Vec& left = Vec());

/// lambda* = <P''(v0) w0 tangent + Q'_v(v0,0) tangent, left>, the eigenvalue of
/// the rank-one restriction to Im Pi. Requires <tangent, left> = 1.
double lambda_star(const AbstractBifProblem& problem, const Vec& tangent,
                   const Vec& left, const Vec& w0);

/// compute_w0 plus Newton continuation of Psi(., eps) = 0 over the ladder
/// (given decreasing; processed ascending from the smallest eps, warm-started).
ScalingSolution continue_branch(const AbstractBifProblem& problem,
                                const std::vector<double>& eps_ladder,
                                const ScalingOptions& opts = {});

}  // namespace vsb
