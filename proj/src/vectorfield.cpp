#include "vsb/vectorfield.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include "vsb/errors.hpp"

namespace vsb {

namespace {

void check_dim(const VectorFieldPair& vf, const Vec& x, const char* where) {
  if (x.size() != vf.dim) {
    std::ostringstream os;
    os << where << ": state has dimension " << x.size() << ", field expects " << vf.dim;
    throw ConfigError(os.str());
  }
}

void check_finite(const Vec& v, const char* where) {
  for (int i = 0; i < v.size(); ++i)
    if (!std::isfinite(v(i))) {
      std::ostringstream os;
      os << where << ": non-finite entry " << i << " = " << v(i);
      throw EvalError(os.str());
    }
}

double fd_step_first(const Vec& x) {
  return std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, x.norm());
}

double fd_step_second(const Vec& x) {
  return std::pow(std::numeric_limits<double>::epsilon(), 0.25) * std::max(1.0, x.norm());
}

}  // namespace

Vec eval_f(const VectorFieldPair& vf, const Vec& x) {
  check_dim(vf, x, "eval_f");
  Vec out = vf.f(x);
  if (out.size() != vf.dim) throw ConfigError("eval_f: field returned wrong dimension");
  check_finite(out, "eval_f");
  return out;
}

Vec eval_g(const VectorFieldPair& vf, double t, const Vec& x, double eps) {
  check_dim(vf, x, "eval_g");
  Vec out = vf.g(t, x, eps);
  if (out.size() != vf.dim) throw ConfigError("eval_g: forcing returned wrong dimension");
  check_finite(out, "eval_g");
  return out;
}

Mat jacobian_f(const VectorFieldPair& vf, const Vec& x) {
  check_dim(vf, x, "jacobian_f");
  if (vf.jac_f) {
    Mat J = vf.jac_f(x);
    for (int i = 0; i < J.size(); ++i)
      if (!std::isfinite(J.data()[i])) throw EvalError("jacobian_f: non-finite entry");
    return J;
  }
  const double h = fd_step_first(x);
  Mat J(vf.dim, vf.dim);
  Vec xp = x, xm = x;
  for (int j = 0; j < vf.dim; ++j) {
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    J.col(j) = (vf.f(xp) - vf.f(xm)) / (2.0 * h);
    xp(j) = x(j);
    xm(j) = x(j);
  }
  for (int i = 0; i < J.size(); ++i)
    if (!std::isfinite(J.data()[i])) throw EvalError("jacobian_f: non-finite FD entry");
  return J;
}

Vec hessian_f(const VectorFieldPair& vf, const Vec& x, const Vec& a, const Vec& b) {
  check_dim(vf, x, "hessian_f");
  if (vf.hess_f) return vf.hess_f(x, a, b);
  // Cross difference d^2/ds du f(x + s a + u b) at s = u = 0.
  const double h = fd_step_second(x) / std::max(1.0, a.norm());
  const double k = fd_step_second(x) / std::max(1.0, b.norm());
  Vec out = (vf.f(x + h * a + k * b) - vf.f(x + h * a - k * b) -
             vf.f(x - h * a + k * b) + vf.f(x - h * a - k * b)) /
            (4.0 * h * k);
  check_finite(out, "hessian_f");
  return out;
}

Mat jacobian_g_x(const VectorFieldPair& vf, double t, const Vec& x, double eps) {
  check_dim(vf, x, "jacobian_g_x");
  if (vf.jac_g_x) return vf.jac_g_x(t, x, eps);
  const double h = fd_step_first(x);
  Mat J(vf.dim, vf.dim);
  Vec xp = x, xm = x;
  for (int j = 0; j < vf.dim; ++j) {
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    J.col(j) = (vf.g(t, xp, eps) - vf.g(t, xm, eps)) / (2.0 * h);
    xp(j) = x(j);
    xm(j) = x(j);
  }
  return J;
}

double periodicity_defect(const VectorFieldPair& vf, const std::vector<Vec>& states,
                          double eps, int t_grid) {
  double worst = 0.0;
  for (int k = 0; k < t_grid; ++k) {
    const double t = vf.period * static_cast<double>(k) / t_grid;
    for (const Vec& x : states)
      worst = std::max(worst, (vf.g(t + vf.period, x, eps) - vf.g(t, x, eps)).norm());
  }
  return worst;
}

namespace {

double param_or(const std::map<std::string, double>& params, const std::string& key,
                double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

VectorFieldPair make_hopf_normal(const std::map<std::string, double>& params,
                                 bool forced) {
  VectorFieldPair vf;
  vf.dim = 2;
  vf.period = 2.0 * M_PI;
  vf.f = [](const Vec& x) {
    const double r2 = x(0) * x(0) + x(1) * x(1);
    Vec out(2);
    out(0) = x(0) - x(1) - x(0) * r2;
    out(1) = x(0) + x(1) - x(1) * r2;
    return out;
  };
  vf.jac_f = [](const Vec& x) {
    Mat J(2, 2);
    J(0, 0) = 1.0 - 3.0 * x(0) * x(0) - x(1) * x(1);
    J(0, 1) = -1.0 - 2.0 * x(0) * x(1);
    J(1, 0) = 1.0 - 2.0 * x(0) * x(1);
    J(1, 1) = 1.0 - x(0) * x(0) - 3.0 * x(1) * x(1);
    return J;
  };
  vf.hess_f = [](const Vec& x, const Vec& a, const Vec& b) {
    Mat H0(2, 2), H1(2, 2);
    H0 << -6.0 * x(0), -2.0 * x(1), -2.0 * x(1), -2.0 * x(0);
    H1 << -2.0 * x(1), -2.0 * x(0), -2.0 * x(0), -6.0 * x(1);
    Vec out(2);
    out(0) = a.dot(H0 * b);
    out(1) = a.dot(H1 * b);
    return out;
  };
  if (forced) {
    const double shift = param_or(params, "forcing_shift", 0.0);
    vf.g = [shift](double t, const Vec&, double) {
      Vec out(2);
      out(0) = std::cos(t - shift);
      out(1) = 0.0;
      return out;
    };
    vf.name = "hopf-normal-cosforce";
  } else {
    vf.g = [](double, const Vec&, double) { return Vec::Zero(2).eval(); };
    vf.name = "hopf-normal-free";
  }
  vf.jac_g_x = [](double, const Vec&, double) { return Mat::Zero(2, 2).eval(); };
  return vf;
}

struct Registry {
  std::map<std::string, ProblemFactory> factories;
  std::mutex mutex;
};

Registry& registry() {
  static Registry* reg = [] {
    auto* r = new Registry;
    r->factories["hopf-normal-cosforce"] = [](const std::map<std::string, double>& p) {
      return make_hopf_normal(p, true);
    };
    r->factories["hopf-normal-free"] = [](const std::map<std::string, double>& p) {
      return make_hopf_normal(p, false);
    };
    return r;
  }();
  return *reg;
}

}  // namespace

void register_problem(const std::string& name, ProblemFactory factory) {
  Registry& reg = registry();
  std::lock_guard<std::mutex> lock(reg.mutex);
  reg.factories[name] = std::move(factory);
}

std::vector<std::string> registered_problems() {
  Registry& reg = registry();
  std::lock_guard<std::mutex> lock(reg.mutex);
  std::vector<std::string> names;
  for (const auto& [name, _] : reg.factories) names.push_back(name);
  return names;
}

VectorFieldPair builtin_problem(const std::string& name,
                                const std::map<std::string, double>& params) {
  Registry& reg = registry();
  ProblemFactory factory;
  {
    std::lock_guard<std::mutex> lock(reg.mutex);
    auto it = reg.factories.find(name);
    if (it == reg.factories.end()) {
      std::ostringstream os;
      os << "unknown problem '" << name << "'; registered:";
      for (const auto& [n, _] : reg.factories) os << " " << n;
      throw ConfigError(os.str());
    }
    factory = it->second;
  }
  return factory(params);
}

}  // namespace vsb
