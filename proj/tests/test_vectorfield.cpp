#include <doctest.h>

#include <cmath>
#include <random>

#include "vsb/errors.hpp"
#include "vsb/vectorfield.hpp"

using namespace vsb;

namespace {
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
}  // namespace

TEST_CASE("eval_f on the hopf normal form") {
  VectorFieldPair vf = builtin_problem("hopf-normal-cosforce");
  CHECK((eval_f(vf, v2(1, 0)) - v2(0, 1)).norm() == 0.0);
  CHECK(eval_f(vf, v2(0, 0)).norm() == 0.0);
  CHECK((eval_f(vf, v2(0, 1)) - v2(-1, 0)).norm() == 0.0);
  CHECK_THROWS_AS(eval_f(vf, Vec::Zero(3)), ConfigError);
}

TEST_CASE("jacobian_f: analytic, linear field, FD fallback") {
  VectorFieldPair vf = builtin_problem("hopf-normal-cosforce");
  Mat J = jacobian_f(vf, v2(1, 0));
  Mat expected(2, 2);
  expected << -2, -1, 1, 0;
  CHECK((J - expected).norm() < 1e-14);

  // linear field: Jacobian is the matrix itself, via the FD fallback
  Mat A(2, 2);
  A << 0.3, -1.2, 2.0, 0.7;
  VectorFieldPair lin;
  lin.dim = 2;
  lin.period = 1.0;
  lin.f = [A](const Vec& x) { return (A * x).eval(); };
  lin.g = [](double, const Vec&, double) { return Vec::Zero(2).eval(); };
  CHECK((jacobian_f(lin, v2(0.4, -2.0)) - A).norm() < 1e-8);

  // FD fallback vs analytic on the hopf field
  VectorFieldPair fd = vf;
  fd.jac_f = nullptr;
  const Vec x = v2(0.3, 0.7);
  CHECK((jacobian_f(fd, x) - jacobian_f(vf, x)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("builtin_problem registry") {
  VectorFieldPair free_vf = builtin_problem("hopf-normal-free");
  CHECK(free_vf.g(1.0, v2(1, 0), 0.0).norm() == 0.0);

  VectorFieldPair forced = builtin_problem("hopf-normal-cosforce");
  CHECK((forced.g(0.0, v2(1, 0), 0.0) - v2(1, 0)).norm() == 0.0);
  CHECK(forced.period == doctest::Approx(2.0 * M_PI).epsilon(1e-15));

  CHECK_THROWS_AS(builtin_problem("no-such-problem"), ConfigError);
  try {
    builtin_problem("no-such-problem");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("hopf-normal-cosforce") != std::string::npos);
  }

  register_problem("linear-test", [](const std::map<std::string, double>&) {
    VectorFieldPair vf;
    vf.dim = 1;
    vf.period = 1.0;
    vf.f = [](const Vec& x) { return (-x).eval(); };
    vf.g = [](double, const Vec&, double) { return Vec::Zero(1).eval(); };
    return vf;
  });
  CHECK(builtin_problem("linear-test").dim == 1);
}

TEST_CASE("analytic vs FD derivatives on random states near the cycle") {
  VectorFieldPair vf = builtin_problem("hopf-normal-cosforce");
  VectorFieldPair fd = vf;
  fd.jac_f = nullptr;
  fd.hess_f = nullptr;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const double phi = M_PI * unit(rng);
    Vec x = v2(std::cos(phi) + 0.5 * unit(rng), std::sin(phi) + 0.5 * unit(rng));
    CHECK((jacobian_f(vf, x) - jacobian_f(fd, x)).cwiseAbs().maxCoeff() < 1e-6);
    Vec a = v2(unit(rng), unit(rng)), b = v2(unit(rng), unit(rng));
    CHECK((hessian_f(vf, x, a, b) - hessian_f(fd, x, a, b)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("hessian symmetry") {
  VectorFieldPair vf = builtin_problem("hopf-normal-cosforce");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    Vec x = v2(unit(rng), unit(rng));
    Vec a = v2(unit(rng), unit(rng)), b = v2(unit(rng), unit(rng));
    CHECK((hessian_f(vf, x, a, b) - hessian_f(vf, x, b, a)).norm() < 1e-14);
  }
}

TEST_CASE("forcing periodicity on built-ins") {
  for (const char* name : {"hopf-normal-cosforce", "hopf-normal-free"}) {
    VectorFieldPair vf = builtin_problem(name);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Vec> states;
    for (int k = 0; k < 10; ++k) states.push_back(v2(unit(rng), unit(rng)));
    CHECK(periodicity_defect(vf, states, 0.3) < 1e-14);
  }
}
