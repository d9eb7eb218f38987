#pragma once

#include <string>
#include <vector>

#include "vsb/ode.hpp"
#include "vsb/types.hpp"
#include "vsb/vectorfield.hpp"

namespace vsb {

/// Uniform-grid periodic cubic Hermite interpolant. Stores m+1 nodes over one
/// period (last node duplicates the first up to closure defect); evaluation
/// wraps the argument and reproduces node values exactly.
struct PeriodicCurve {
  double period = 0.0;
  std::vector<double> theta;
  std::vector<Vec> values;
  std::vector<Vec> derivs;

  Vec at(double th) const;
};

struct LimitCycle {
  Vec base_point;   // x0(0)
  double period = 0.0;
  PeriodicCurve x;     // x0(theta), derivative nodes xdot0
  PeriodicCurve xdot;  // xdot0(theta), derivative nodes f'(x0) f(x0)

  Vec x0(double theta) const { return x.at(theta); }
  Vec xdot0(double theta) const { return xdot.at(theta); }
  int grid_size() const { return static_cast<int>(x.theta.size()) - 1; }
};

struct Monodromy {
  Mat matrix;        // Y(T) along the cycle from base_point
  CVec multipliers;  // eigenvalues of matrix
};

struct AdjointOrbit {
  PeriodicCurve z;  // z0(theta), derivative nodes -f'(x0)^T z0
  double normalization = 0.0;  // <xdot0(0), z0(0)> after rescaling

  Vec z0(double theta) const { return z.at(theta); }
};

struct CycleOptions {
  double cycle_tol = 1e-9;
  int max_iter = 30;
  int samples_per_period = 512;
  double unit_multiplier_tol = 1e-6;
  double stability_margin = 1e-4;
};

/// Newton shooting for the base point of the T-periodic cycle with the phase
/// condition <f(guess), v - guess> = 0; the period is fixed to the forcing
/// period. The bordered system [Y(T)-I; f(guess)^T] is solved in least-squares
/// form.
LimitCycle find_limit_cycle(const VectorFieldPair& vf, const Vec& guess,
                            const CycleOptions& copts, const IntegratorOptions& iopts);

Monodromy monodromy(const VectorFieldPair& vf, const LimitCycle& cycle,
                    const IntegratorOptions& iopts);

/// Periodic adjoint solution, Perron-normalized so <xdot0(0), z0(0)> = 1.
/// The unit-multiplier eigenvector of the adjoint monodromy seeds a backward
/// integration of z' = -(f'(x0))^T z (backward is the contracting direction,
/// forward integration would amplify errors by the reciprocal multipliers).
AdjointOrbit adjoint_periodic(const VectorFieldPair& vf, const LimitCycle& cycle,
                              const Monodromy& mono, const CycleOptions& copts,
                              const IntegratorOptions& iopts);

/// max over the grid of |<xdot0(theta), z0(theta)> - 1|.
double perron_check(const LimitCycle& cycle, const AdjointOrbit& adj);

struct StabilityHypothesis {
  bool ok = false;
  bool unit_simple = false;
  std::string report;
};

/// True iff exactly one multiplier is within tolerance of 1 and the remaining
/// n-1 satisfy |mu| < 1 - margin. The report also lists the alternative
/// "negative real part of mu - 1" reading for each nontrivial multiplier.
StabilityHypothesis stability_hypothesis_check(const Monodromy& mono,
                                               const CycleOptions& copts);

}  // namespace vsb
