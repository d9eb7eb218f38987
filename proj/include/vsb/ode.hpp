#pragma once

#include <functional>
#include <vector>

#include "vsb/linalg.hpp"
#include "vsb/types.hpp"
#include "vsb/vectorfield.hpp"

namespace vsb {

enum class OdeMethod { rk45, rk4_fixed };

struct IntegratorOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  OdeMethod method = OdeMethod::rk45;
  int rk4_steps = 4096;       // total steps for the fixed-step method
  double h_init = 0.0;        // 0 -> automatic
  long max_steps = 2000000;
};

using OdeRhs = std::function<void(double t, const Vec& y, Vec& dydt)>;

/// Accepted-step mesh with right-hand-side values; dense output by cubic
/// Hermite interpolation. Node evaluation reproduces stored states exactly.
struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> states;
  std::vector<Vec> derivs;
  int interp_order = 3;

  double t0() const { return t.front(); }
  double t1() const { return t.back(); }
  Vec at(double time) const;
};

/// Integrate y' = rhs(t, y) from t0 to t1 (t1 >= t0).
Trajectory integrate(const OdeRhs& rhs, double t0, double t1, const Vec& y0,
                     const IntegratorOptions& opts);

/// Same, but the mesh is forced to contain the given strictly increasing grid
/// points (steps are clamped, never interpolated onto the grid).
Trajectory integrate_to_grid(const OdeRhs& rhs, const std::vector<double>& grid,
                             const Vec& y0, const IntegratorOptions& opts);

/// Flow of x' = f(x) + eps g(t, x, eps).
Trajectory flow(const VectorFieldPair& vf, double t0, double t1, const Vec& x_init,
                double eps, const IntegratorOptions& opts);

Trajectory flow_to_grid(const VectorFieldPair& vf, const std::vector<double>& grid,
                        const Vec& x_init, double eps, const IntegratorOptions& opts);

/// Base flow with first (and optionally second) variations, integrated as one
/// augmented system. Packed state layout: [x (n) | vec(Y) (n^2) | vec(S) (n^3)].
struct VariationalFlow {
  int n = 0;
  int order = 1;
  Trajectory packed;

  Vec state_at(double time) const;
  Mat fundamental_at(double time) const;
  BilinearMap second_at(double time) const;

  Vec final_state() const { return unpack_state(packed.states.back()); }
  Mat monodromy() const { return unpack_fundamental(packed.states.back()); }
  BilinearMap final_second() const { return unpack_second(packed.states.back()); }

  Vec unpack_state(const Vec& packed_state) const;
  Mat unpack_fundamental(const Vec& packed_state) const;
  BilinearMap unpack_second(const Vec& packed_state) const;
};

/// order = 1: Y' = (f'(x) + eps g'_x) Y, Y(t0) = I.
/// order = 2: additionally S' = (f'(x)) S + f''(x)[Y., Y.], S(t0) = 0.
/// The second variation requires eps = 0 (no g Hessian oracle in the data model).
VariationalFlow flow_variational(const VectorFieldPair& vf, double t0, double t1,
                                 const Vec& x_init, double eps, int order,
                                 const IntegratorOptions& opts);

/// Endpoint y(t1) of y' = A(t) y + b(t), y(t0) = y_init.
Vec solve_linear_inhomogeneous(const std::function<Mat(double)>& A,
                               const std::function<Vec(double)>& b, const Vec& y_init,
                               double t0, double t1, const IntegratorOptions& opts);

}  // namespace vsb
