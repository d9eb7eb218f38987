#include <doctest.h>

#include <cmath>
#include <random>

#include "test_fixtures.hpp"
#include "vsb/errors.hpp"
#include "vsb/malkin.hpp"

using namespace vsb;
using vsb::testing::hopf;

namespace {
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
const double kTwoPi = 2.0 * M_PI;

// closed form for cos forcing on the unit cycle: M(theta) = -pi sin(theta)
double M_exact(double theta) { return -M_PI * std::sin(theta); }
}  // namespace

TEST_CASE("malkin_M against the closed form") {
  const auto& fx = hopf();
  CHECK(std::abs(malkin_M(fx.cycle, fx.adj, fx.vf, M_PI / 2) - (-M_PI)) < 1e-7);
  CHECK(std::abs(malkin_M(fx.cycle, fx.adj, fx.vf, 0.0)) < 1e-8);

  double worst = 0.0;
  for (int k = 0; k < 128; ++k) {
    const double th = kTwoPi * k / 128.0;
    worst = std::max(worst, std::abs(malkin_M(fx.cycle, fx.adj, fx.vf, th) - M_exact(th)));
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("malkin_M vanishes identically without forcing") {
  const auto& fx = hopf();
  for (double th : {0.0, 1.0, 4.0})
    CHECK(std::abs(malkin_M(fx.cycle, fx.adj, fx.vf_free, th)) < 1e-12);
}

TEST_CASE("Lemma-2 representation agrees with the integral definition") {
  const auto& fx = hopf();
  double worst = 0.0;
  for (int k = 0; k < 64; ++k) {
    const double th = kTwoPi * k / 64.0;
    const Vec q = Q_at_zero(fx.vf, fx.cycle, th, fx.iopts);
    worst = std::max(worst, std::abs(malkin_M_via_Q(q, fx.adj, th) -
                                     malkin_M(fx.cycle, fx.adj, fx.vf, th)));
  }
  CHECK(worst < 1e-7);

  const Vec qfree = Q_at_zero(fx.vf_free, fx.cycle, 0.5, fx.iopts);
  CHECK(std::abs(malkin_M_via_Q(qfree, fx.adj, 0.5)) < 1e-12);
}

TEST_CASE("malkin_Mprime via the derivative formula") {
  const auto& fx = hopf();
  CHECK(std::abs(malkin_Mprime(local_operators(*fx.ops, fx.cycle, 0.0), fx.cycle, fx.adj,
                               0.0) -
                 (-M_PI)) < 1e-5);
  CHECK(std::abs(malkin_Mprime(local_operators(*fx.ops, fx.cycle, M_PI), fx.cycle, fx.adj,
                               M_PI) -
                 M_PI) < 1e-5);

  // cross-check against central differences of the quadrature at random phases
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, kTwoPi);
  const double h = 1e-4;
  for (int k = 0; k < 16; ++k) {
    const double th = unit(rng);
    const double fd = (malkin_M(fx.cycle, fx.adj, fx.vf, th + h) -
                       malkin_M(fx.cycle, fx.adj, fx.vf, th - h)) /
                      (2.0 * h);
    const double lemma = malkin_Mprime(local_operators(*fx.ops, fx.cycle, th), fx.cycle,
                                       fx.adj, th);
    CHECK(std::abs(lemma - fd) < 1e-5);
  }
}

TEST_CASE("find_zeros on the cos forcing") {
  const auto& fx = hopf();
  auto M = [&](double th) { return malkin_M(fx.cycle, fx.adj, fx.vf, th); };
  auto Mp = [&](double th) {
    return malkin_Mprime(local_operators(*fx.ops, fx.cycle, th), fx.cycle, fx.adj, th);
  };
  MalkinOptions opts;
  MalkinProfile profile = find_zeros(M, Mp, fx.cycle.period, opts);

  CHECK_FALSE(profile.identically_zero);
  REQUIRE(profile.zeros.size() == 2);
  CHECK(std::abs(profile.zeros[0].theta0 - 0.0) < 1e-8);
  CHECK(std::abs(profile.zeros[1].theta0 - M_PI) < 1e-8);
  CHECK(profile.zeros[0].Mprime == doctest::Approx(-M_PI).epsilon(1e-4));
  CHECK(profile.zeros[1].Mprime == doctest::Approx(M_PI).epsilon(1e-4));
  CHECK(profile.zeros[0].stable_candidate);
  CHECK_FALSE(profile.zeros[1].stable_candidate);
  for (const auto& z : profile.zeros) {
    CHECK(std::abs(z.M) <= opts.zero_tol);
    CHECK_FALSE(z.degenerate);
    CHECK(z.method == "lemma3");
  }
}

TEST_CASE("find_zeros flags an identically zero profile") {
  const auto& fx = hopf();
  auto M = [&](double th) { return malkin_M(fx.cycle, fx.adj, fx.vf_free, th); };
  MalkinProfile profile = find_zeros(M, nullptr, fx.cycle.period, MalkinOptions{});
  CHECK(profile.identically_zero);
  CHECK(profile.zeros.empty());
}

TEST_CASE("find_zeros with shifted forcing") {
  // g = (cos(t - 1), 0): M(theta) = -pi sin(theta + 1), zeros at pi-1 and 2pi-1
  const auto& fx = hopf();
  VectorFieldPair shifted = builtin_problem("hopf-normal-cosforce", {{"forcing_shift", 1.0}});
  auto M = [&](double th) { return malkin_M(fx.cycle, fx.adj, shifted, th); };
  MalkinProfile profile = find_zeros(M, nullptr, fx.cycle.period, MalkinOptions{});
  REQUIRE(profile.zeros.size() == 2);
  CHECK(std::abs(profile.zeros[0].theta0 - (M_PI - 1.0)) < 1e-8);
  CHECK(std::abs(profile.zeros[1].theta0 - (kTwoPi - 1.0)) < 1e-8);
  CHECK(profile.zeros[0].method == "finite-diff");
  // verify against the closed form on the grid as well
  for (int k = 0; k < 32; ++k) {
    const double th = kTwoPi * k / 32.0;
    CHECK(std::abs(M(th) + M_PI * std::sin(th + 1.0)) < 1e-7);
  }
}

TEST_CASE("projector at theta = 0") {
  const auto& fx = hopf();
  RankOneProjector p = projector_at(fx.cycle, fx.adj, 0.0);
  Mat expected(2, 2);
  expected << 0, 0, 0, 1;
  CHECK((p.matrix - expected).norm() < 1e-8);

  const Vec xdot = fx.cycle.xdot0(0.0);
  CHECK((p.matrix * xdot - xdot).norm() < 1e-8);

  // kernel: anything orthogonal to z0 is annihilated
  const Vec z = fx.adj.z0(0.0);
  Vec perp = v2(-z(1), z(0));
  CHECK((p.matrix * perp).norm() < 1e-8);
}

TEST_CASE("projector idempotency across the period") {
  const auto& fx = hopf();
  const Mat I = Mat::Identity(2, 2);
  for (int k = 0; k < 16; ++k) {
    const double th = kTwoPi * k / 16.0;
    RankOneProjector p = projector_at(fx.cycle, fx.adj, th);
    CHECK((p.matrix * p.matrix - p.matrix).norm() < 1e-10);
    const Mat co = I - p.matrix;
    CHECK((co * co - co).norm() < 1e-10);
    Eigen::JacobiSVD<Mat> svd(p.matrix);
    CHECK(svd.singularValues()(1) < 1e-10);
  }
}

TEST_CASE("unnormalized pairing is rejected") {
  const auto& fx = hopf();
  AdjointOrbit doubled = fx.adj;
  for (auto& z : doubled.z.values) z *= 2.0;
  for (auto& z : doubled.z.derivs) z *= 2.0;
  CHECK_THROWS_AS(projector_at(fx.cycle, doubled, 0.3), NormalizationError);
}

TEST_CASE("grid size below 16 is rejected") {
  MalkinOptions opts;
  opts.theta_grid = 8;
  auto M = [](double th) { return std::sin(th); };
  CHECK_THROWS_AS(find_zeros(M, nullptr, kTwoPi, opts), ConfigError);
}
