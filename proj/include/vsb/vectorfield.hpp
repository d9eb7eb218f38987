#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vsb/types.hpp"

namespace vsb {

/// Autonomous field f plus T-periodic perturbation g, with optional analytic
/// derivative oracles. Missing oracles fall back to central finite differences
/// (step cbrt(eps) for first derivatives, fourth root for second).
struct VectorFieldPair {
  int dim = 0;
  double period = 0.0;
  std::function<Vec(const Vec&)> f;
  std::function<Vec(double, const Vec&, double)> g;  // g(t, x, eps)
  std::function<Mat(const Vec&)> jac_f;              // optional
  std::function<Vec(const Vec&, const Vec&, const Vec&)> hess_f;  // optional, f''(x)[a,b]
  std::function<Mat(double, const Vec&, double)> jac_g_x;         // optional
  std::string name;
};

Vec eval_f(const VectorFieldPair& vf, const Vec& x);
Vec eval_g(const VectorFieldPair& vf, double t, const Vec& x, double eps);

/// Analytic Jacobian if supplied, otherwise central finite differences.
Mat jacobian_f(const VectorFieldPair& vf, const Vec& x);

/// f''(x)[a,b]; analytic oracle or cross finite differences.
Vec hessian_f(const VectorFieldPair& vf, const Vec& x, const Vec& a, const Vec& b);

Mat jacobian_g_x(const VectorFieldPair& vf, double t, const Vec& x, double eps);

/// max over a time grid and the given states of ||g(t+T,x,eps) - g(t,x,eps)||.
double periodicity_defect(const VectorFieldPair& vf, const std::vector<Vec>& states,
                          double eps, int t_grid = 64);

using ProblemFactory =
    std::function<VectorFieldPair(const std::map<std::string, double>&)>;

void register_problem(const std::string& name, ProblemFactory factory);

std::vector<std::string> registered_problems();

VectorFieldPair builtin_problem(const std::string& name,
                                const std::map<std::string, double>& params = {});

}  // namespace vsb
