#include "vsb/scaling.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <sstream>

#include "vsb/errors.hpp"

namespace vsb {

namespace {

constexpr double kMachEps = std::numeric_limits<double>::epsilon();

Mat psecond_partial(const AbstractBifProblem& p, const Vec& v, const Vec& a) {
  Mat out(p.dim, p.dim);
  Vec e = Vec::Zero(p.dim);
  for (int j = 0; j < p.dim; ++j) {
    e(j) = 1.0;
    out.col(j) = p.Psecond(v, a, e);
    e(j) = 0.0;
  }
  return out;
}

}  // namespace

void AuditReport::throw_if_failed() const {
  for (const auto& c : checks)
    if (!c.pass) {
      std::ostringstream os;
      os << "hypothesis audit failed: " << c.name << " (residual " << c.residual
         << (c.lower_bound ? " < floor " : " > tolerance ") << c.threshold << ")";
      throw AssemblyError(os.str(), c.name, c.residual);
    }
}

Mat riesz_projector(const Mat& A, double radius, const ScalingOptions& opts) {
  const int n = static_cast<int>(A.rows());
  if (radius <= 0.0) throw ConfigError("riesz_projector: radius must be positive");

  Eigen::EigenSolver<Mat> es(A);
  int inside = 0;
  double inner_abs = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = std::abs(es.eigenvalues()(i));
    if (std::abs(r - radius) < opts.riesz_band * radius) {
      std::ostringstream os;
      os << "riesz_projector: eigenvalue of modulus " << r << " too close to the contour "
         << radius << "; choose a radius separating the spectrum (e.g. between "
         << r * 0.5 << " and " << r * 1.5 << ")";
      throw ContourError(os.str());
    }
    if (r < radius) {
      ++inside;
      inner_abs = std::max(inner_abs, r);
    }
  }
  if (inside != 1) {
    std::ostringstream os;
    os << "riesz_projector: contour of radius " << radius << " encloses " << inside
       << " eigenvalues, expected exactly the simple zero eigenvalue";
    throw ContourError(os.str());
  }
  if (inner_abs > 0.5 * radius) {
    std::ostringstream os;
    os << "riesz_projector: enclosed eigenvalue has modulus " << inner_abs
       << ", not consistent with the zero eigenvalue of the contour radius " << radius;
    throw ContourError(os.str());
  }

  // Trapezoid rule on the circle: Pi = (1/N) sum_k lambda_k (lambda_k I - A)^{-1}.
  const int N = opts.riesz_points;
  CMat acc = CMat::Zero(n, n);
  const CMat Ac = A.cast<std::complex<double>>();
  const CMat I = CMat::Identity(n, n);
  for (int k = 0; k < N; ++k) {
    const double phi = 2.0 * M_PI * static_cast<double>(k) / N;
    const std::complex<double> lam = radius * std::exp(std::complex<double>(0.0, phi));
    acc += lam * (lam * I - Ac).partialPivLu().solve(I);
  }
  return (acc / static_cast<double>(N)).real();
}

Vec solve_w1(const AbstractBifProblem& problem) {
  const Mat Pp = problem.Pprime(problem.v0);
  const Vec q0 = problem.Q(problem.v0, 0.0);
  return restricted_solve(Pp, problem.projector, -q0);
}

namespace {

/// Operator and right-hand side of the w2 stage.
struct W2System {
  Mat L;    // Pi P''(v0) w1 + Pi Q'_v(v0, 0), maps into Im Pi
  Vec rhs;  // -1/2 Pi P'' w1 w1 - Pi Q'_v w1 - Pi Q'_eps
};

W2System w2_system(const AbstractBifProblem& p, const Vec& w1) {
  W2System sys;
  const Mat Qv = p.Qprime_v(p.v0, 0.0);
  sys.L = p.projector * (psecond_partial(p, p.v0, w1) + Qv);
  sys.rhs = p.projector *
            (-0.5 * p.Psecond(p.v0, w1, w1) - Qv * w1 - p.Qprime_eps(p.v0, 0.0));
  return sys;
}

}  // namespace

Vec solve_w2(const AbstractBifProblem& problem, const Vec& w1) {
  const W2System sys = w2_system(problem, w1);
  return range_solve(sys.L, problem.projector, sys.rhs);
}

AuditReport validate_problem(const AbstractBifProblem& problem,
                             const ScalingOptions& opts) {
  AuditReport report;
  const Mat& Pi = problem.projector;
  const Mat Pp = problem.Pprime(problem.v0);
  const Vec q0 = problem.Q(problem.v0, 0.0);

  auto upper = [&](const std::string& name, double residual, double tol) {
    report.checks.push_back({name, residual, tol, residual <= tol, false});
  };
  auto lower = [&](const std::string& name, double value, double floor) {
    report.checks.push_back({name, value, floor, value >= floor, true});
  };

  upper("P(v0) = 0", problem.P(problem.v0).norm(), opts.audit_tol);
  upper("Pi P'(v0) = 0", (Pi * Pp).norm(), opts.audit_tol);
  upper("Pi Q(v0,0) = 0", (Pi * q0).norm(), opts.audit_tol);
  lower("P'(v0) invertible on Ker Pi", restricted_min_singular_value(Pp, Pi),
        opts.invertibility_floor);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < opts.audit_pairs; ++k) {
    Vec r(problem.dim), s(problem.dim);
    for (int i = 0; i < problem.dim; ++i) {
      r(i) = normal(rng);
      s(i) = normal(rng);
    }
    r.normalize();
    s.normalize();
    const Vec pr = Pi * r, ps = Pi * s;
    const double scale = std::max(1e-12, pr.norm() * ps.norm());
    worst = std::max(worst, (Pi * problem.Psecond(problem.v0, pr, ps)).norm() / scale);
  }
  upper("Pi P''(v0) Pi r Pi s = 0", worst, opts.audit_tol);

  bool prereq = true;
  for (const auto& c : report.checks) prereq = prereq && c.pass;
  if (prereq) {
    const Vec w1 = solve_w1(problem);
    const W2System sys = w2_system(problem, w1);
    lower("(INV) invertible on Im Pi", range_min_singular_value(sys.L, Pi),
          opts.invertibility_floor);
  } else {
    report.checks.push_back(
        {"(INV) invertible on Im Pi", 0.0, opts.invertibility_floor, false, true});
  }

  report.pass = true;
  for (const auto& c : report.checks) report.pass = report.pass && c.pass;
  return report;
}

Vec psi_eval(const AbstractBifProblem& problem, const Vec& w, double eps) {
  if (eps < 0.0) throw ConfigError("psi_eval: eps must be >= 0");
  const Mat& Pi = problem.projector;
  if (eps == 0.0) {
    const Vec q0 = problem.Q(problem.v0, 0.0);
    const Mat Qv = problem.Qprime_v(problem.v0, 0.0);
    const Vec qe = problem.Qprime_eps(problem.v0, 0.0);
    const Mat Pp = problem.Pprime(problem.v0);
    Vec out = Pi * (0.5 * problem.Psecond(problem.v0, w, w) + Qv * w + qe);
    const Vec lin = Pp * w + q0;
    out += lin - Pi * lin;
    return out;
  }
  const Vec v = problem.v0 + eps * w;
  const Vec phi = problem.P(v) + eps * problem.Q(v, eps);
  const Vec pphi = Pi * phi;
  return (phi - pphi) / eps + pphi / (eps * eps);
}

Mat psi_jacobian(const AbstractBifProblem& problem, const Vec& w, double eps) {
  if (eps < 0.0) throw ConfigError("psi_jacobian: eps must be >= 0");
  const Mat& Pi = problem.projector;
  const Mat I = Mat::Identity(problem.dim, problem.dim);
  if (eps == 0.0) {
    return Pi * (psecond_partial(problem, problem.v0, w) +
                 problem.Qprime_v(problem.v0, 0.0)) +
           (I - Pi) * problem.Pprime(problem.v0);
  }
  const Vec v = problem.v0 + eps * w;
  const Mat dphi = problem.Pprime(v) + eps * problem.Qprime_v(v, eps);
  return (I - Pi) * dphi + (Pi * dphi) / eps;
}

ScalingSolution compute_w0(const AbstractBifProblem& problem, const ScalingOptions& opts) {
  validate_problem(problem, opts).throw_if_failed();
  ScalingSolution sol;
  sol.w1 = solve_w1(problem);
  sol.w2 = solve_w2(problem, sol.w1);
  sol.w0 = sol.w1 + sol.w2;
  sol.psi0_residual = psi_eval(problem, sol.w0, 0.0).norm();
  if (sol.psi0_residual > 1e-8) {
    std::ostringstream os;
    os << "compute_w0: ||Psi(w0, 0)|| = " << sol.psi0_residual
       << " exceeds 1e-8; the two-stage solve is inconsistent with psi_eval";
    throw EvalError(os.str());
  }
  try {
    auto [tangent, left] = rank_one_factors(problem.projector);
    sol.lambda_star = lambda_star(problem, tangent, left, sol.w0);
    sol.has_lambda_star = true;
  } catch (const SingularOperatorError&) {
    sol.has_lambda_star = false;  // Pi of rank > 1: w0 is fine, spectra are not tracked
  }
  return sol;
}

double lambda_star(const AbstractBifProblem& problem, const Vec& tangent,
                   const Vec& left, const Vec& w0) {
  Eigen::JacobiSVD<Mat> svd(problem.projector);
  if (svd.singularValues().size() > 1 && svd.singularValues()(1) > 1e-8)
    throw SingularOperatorError(
        "lambda_star: projector has rank > 1; eigenvalue extraction is implemented "
        "for the rank-one case only");
  if (std::abs(tangent.dot(left) - 1.0) > 1e-6)
    throw NormalizationError("lambda_star: <tangent, left> must equal 1");
  return (problem.Psecond(problem.v0, w0, tangent) +
          problem.Qprime_v(problem.v0, 0.0) * tangent)
      .dot(left);
}

EigenTrack lambda_epsilon(const AbstractBifProblem& problem, double eps, const Vec& w,
                          const Vec& left) {
  const Vec v = problem.v0 + eps * w;
  Mat dphi = problem.Pprime(v);
  if (eps != 0.0) dphi += eps * problem.Qprime_v(v, eps);
  Eigen::EigenSolver<Mat> es(dphi);
  const CVec lam = es.eigenvalues();

  int best = -1;
  double best_abs = std::numeric_limits<double>::infinity();
  double best_overlap = -1.0;
  for (int i = 0; i < lam.size(); ++i) {
    const double a = std::abs(lam(i));
    const double overlap =
        left.size() > 0 ? std::abs(es.eigenvectors().col(i).dot(left.cast<std::complex<double>>()))
                        : 0.0;
    const bool tie = best >= 0 && std::abs(a - best_abs) <= 1e-12 * (1.0 + best_abs);
    if (best < 0 || (tie ? overlap > best_overlap : a < best_abs)) {
      best = i;
      best_abs = a;
      best_overlap = overlap;
    }
  }

  EigenTrack out;
  out.complex_pair = std::abs(lam(best).imag()) > 1e-10 * (1.0 + std::abs(lam(best)));
  out.lambda = lam(best).real();
  CVec vec = es.eigenvectors().col(best);
  int imax = 0;
  for (int i = 1; i < vec.size(); ++i)
    if (std::abs(vec(i)) > std::abs(vec(imax))) imax = i;
  out.eigvec = (vec / (vec(imax) / std::abs(vec(imax)))).real();
  out.eigvec.normalize();
  return out;
}

namespace {

struct NewtonResult {
  Vec w;
  double residual = 0.0;
  int iters = 0;
  bool converged = false;
  bool at_floor = false;
};

NewtonResult newton_psi(const AbstractBifProblem& problem, const Vec& w_start, double eps,
                        const ScalingOptions& opts) {
  NewtonResult res;
  res.w = w_start;
  const double guard =
      eps > 0.0 ? opts.noise_guard * kMachEps / (eps * eps) : 0.0;
  const double accept = std::max(opts.newton_tol, guard);

  Vec r = psi_eval(problem, res.w, eps);
  res.residual = r.norm();
  for (int it = 0; it < opts.newton_max_iter; ++it) {
    if (res.residual <= opts.newton_tol) {
      res.converged = true;
      res.iters = it;
      return res;
    }
    Mat J = psi_jacobian(problem, res.w, eps);
    Eigen::FullPivLU<Mat> lu(J);
    if (!lu.isInvertible())
      throw SingularOperatorError("branch Newton: singular Psi Jacobian");
    const Vec step = lu.solve(-r);

    double alpha = 1.0;
    Vec w_next = res.w + step;
    Vec r_next = psi_eval(problem, w_next, eps);
    int bt = 0;
    while (r_next.norm() > (1.0 - 1e-4 * alpha) * res.residual && bt < 12) {
      alpha *= 0.5;
      w_next = res.w + alpha * step;
      r_next = psi_eval(problem, w_next, eps);
      ++bt;
    }
    if (bt >= 12 && r_next.norm() >= res.residual) {
      // stagnation: no descent direction left at this precision
      res.iters = it;
      res.converged = res.residual <= accept;
      res.at_floor = res.converged && res.residual > opts.newton_tol;
      return res;
    }
    res.w = w_next;
    r = r_next;
    res.residual = r.norm();
    res.iters = it + 1;
  }
  res.converged = res.residual <= accept;
  res.at_floor = res.converged && res.residual > opts.newton_tol;
  return res;
}

}  // namespace

ScalingSolution continue_branch(const AbstractBifProblem& problem,
                                const std::vector<double>& eps_ladder,
                                const ScalingOptions& opts) {
  for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
    if (eps_ladder[i] <= 0.0)
      throw ConfigError("continue_branch: eps_ladder entries must be positive");
    if (i > 0 && eps_ladder[i] >= eps_ladder[i - 1])
      throw ConfigError("continue_branch: eps_ladder must be strictly decreasing");
  }

  ScalingSolution sol = compute_w0(problem, opts);
  Vec left;
  try {
    left = rank_one_factors(problem.projector).second;
  } catch (const SingularOperatorError&) {
    // rank > 1: eigenvalue tracking disabled
  }

  std::vector<double> ascending(eps_ladder.rbegin(), eps_ladder.rend());
  std::vector<BranchRecord> records;
  Vec w_prev = sol.w0;
  for (double eps : ascending) {
    NewtonResult nr = newton_psi(problem, w_prev, eps, opts);
    if (!nr.converged) {
      std::ostringstream os;
      os << "branch truncated at eps = " << eps << ": Newton residual " << nr.residual
         << " after " << nr.iters
         << " iterations (validity radius of the scaled branch exceeded)";
      sol.branch_diagnostic = os.str();
      break;
    }
    BranchRecord rec;
    rec.eps = eps;
    rec.w = nr.w;
    rec.psi_residual = nr.residual;
    rec.newton_iters = nr.iters;
    rec.at_noise_floor = nr.at_floor;
    if (left.size() > 0) {
      EigenTrack tr = lambda_epsilon(problem, eps, nr.w, left);
      rec.lambda = tr.lambda;
      rec.eigvec = tr.eigvec;
      rec.lambda_complex_pair = tr.complex_pair;
    } else {
      rec.lambda = std::numeric_limits<double>::quiet_NaN();
    }
    records.push_back(std::move(rec));
    w_prev = records.back().w;
  }
  // report in the given (decreasing) ladder order
  sol.branch.assign(records.rbegin(), records.rend());
  return sol;
}

}  // namespace vsb
