#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "crossdiff/entropy.hpp"

using namespace crossdiff;

namespace {

StateVec state1(double a) {
  StateVec v(1);
  v[0] = a;
  return v;
}

StateVec state2(double a, double b) {
  StateVec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("logistic N=1 closed-form values") {
  const EntropyDensity e = EntropyDensity::logistic(1);
  CHECK(e.s(state1(0.5)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(e.grad_s(state1(0.5))[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(e.hess_s(state1(0.5))(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(e.u(state1(0.0))[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(e.jac_u(state1(0.0))(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("logistic N=2 uniform state is the minimum") {
  const EntropyDensity e = EntropyDensity::logistic(2);
  CHECK(e.s(state2(1.0 / 3.0, 1.0 / 3.0)) == doctest::Approx(0.0).epsilon(1e-14));
  const StateVec u0 = e.u(state2(0.0, 0.0));
  CHECK(u0[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(u0[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.05, 0.45);
  for (int i = 0; i < 200; ++i) {
    const StateVec rho = state2(u(rng), u(rng));
    if ((rho - state2(1.0 / 3, 1.0 / 3)).norm() > 1e-3) CHECK(e.s(rho) > 0.0);
  }
}

TEST_CASE("scaled-log entropy for the Fisher equilibrium") {
  const EntropyDensity e = EntropyDensity::scaled_log(2.0);
  CHECK(e.s(state1(1.0)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(e.grad_s(state1(1.0))[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(e.u(state1(0.0))[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("round trips u(grad_s(rho)) = rho and jac_u * hess_s = I") {
  std::mt19937 rng(2);
  for (int n : {1, 2, 3}) {
    const EntropyDensity e = EntropyDensity::logistic(n);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    int done = 0;
    while (done < 500) {
      StateVec rho(n);
      double sum = 0.0;
      for (int c = 0; c < n; ++c) {
        rho[c] = 0.02 + 0.96 * u01(rng);
        sum += rho[c];
      }
      if (sum >= 0.98) continue;
      ++done;
      const StateVec back = e.u(e.grad_s(rho));
      CHECK((back - rho).cwiseAbs().maxCoeff() < 1e-12);
      const StateVec w = e.grad_s(rho);
      const StateMat prod = e.jac_u(w) * e.hess_s(e.u(w));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          CHECK(prod(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("gradient and Hessian match finite differences") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u01(0.05, 0.4);
  const double delta = 1e-6;
  for (auto e : {EntropyDensity::logistic(2), EntropyDensity::logistic(1),
                 EntropyDensity::scaled_log(2.0), EntropyDensity::boltzmann()}) {
    for (int trial = 0; trial < 100; ++trial) {
      StateVec rho(e.components);
      for (int c = 0; c < e.components; ++c) rho[c] = u01(rng);
      const StateVec g = e.grad_s(rho);
      const StateMat h = e.hess_s(rho);
      for (int c = 0; c < e.components; ++c) {
        StateVec hi = rho, lo = rho;
        hi[c] += delta;
        lo[c] -= delta;
        const double fd = (e.s(hi) - e.s(lo)) / (2 * delta);
        CHECK(g[c] == doctest::Approx(fd).epsilon(1e-6));
        const StateVec fd_row = (e.grad_s(hi) - e.grad_s(lo)) / (2 * delta);
        for (int d = 0; d < e.components; ++d)
          CHECK(h(d, c) == doctest::Approx(fd_row[d]).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("u maps all of R^N strictly into the admissible set") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> w50(-50.0, 50.0);
  const EntropyDensity e2 = EntropyDensity::logistic(2);
  for (int i = 0; i < 10000; ++i) {
    const StateVec u = e2.u(state2(w50(rng), w50(rng)));
    CHECK(u[0] > 0.0);
    CHECK(u[1] > 0.0);
    CHECK(u[0] < 1.0);
    CHECK(u[1] < 1.0);
    CHECK(u[0] + u[1] < 1.0);
  }
}

TEST_CASE("overflow safety at |w| = 700") {
  for (double w : {700.0, -700.0}) {
    const EntropyDensity e1 = EntropyDensity::logistic(1);
    const StateVec u = e1.u(state1(w));
    CHECK(std::isfinite(u[0]));
    CHECK(u[0] > 0.0);
    CHECK(u[0] < 1.0);

    const EntropyDensity e2 = EntropyDensity::logistic(2);
    const StateVec u2 = e2.u(state2(w, w));
    CHECK(u2[0] > 0.0);
    CHECK(u2[0] + u2[1] < 1.0);

    const EntropyDensity es = EntropyDensity::scaled_log(2.0);
    const StateVec us = es.u(state1(w));
    CHECK(us[0] > 0.0);
    CHECK(us[0] < 2.0);
  }
  CHECK_THROWS_AS(EntropyDensity::logistic(1).u(state1(std::nan(""))), NumericError);
}

TEST_CASE("relative entropy") {
  const EntropyDensity e = EntropyDensity::logistic(1);
  CHECK(e.relative_entropy(state1(0.37), state1(0.37)) == doctest::Approx(0.0).epsilon(1e-15));
  // grad_s vanishes at 0.5, so s^inf(0.6|0.5) = s(0.6)
  CHECK(e.relative_entropy(state1(0.6), state1(0.5)) ==
        doctest::Approx(e.s(state1(0.6))).epsilon(1e-14));

  // convexity: nonnegative with the segment curvature lower bound
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u01(0.05, 0.9);
  const EntropyDensity e2 = EntropyDensity::logistic(2);
  int done = 0;
  while (done < 200) {
    const StateVec rho = state2(0.45 * u01(rng), 0.45 * u01(rng));
    const StateVec g = state2(0.45 * u01(rng), 0.45 * u01(rng));
    if (rho.sum() >= 0.95 || g.sum() >= 0.95) continue;
    ++done;
    const double r = e2.relative_entropy(rho, g);
    CHECK(r >= -1e-14);
    double lambda_min = 1e300;
    for (int s = 0; s <= 10; ++s) {
      const StateVec mid = rho + (g - rho) * (s / 10.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(e2.hess_s(mid)));
      lambda_min = std::min(lambda_min, eig.eigenvalues().minCoeff());
    }
    CHECK(r >= 0.5 * lambda_min * (rho - g).squaredNorm() - 1e-12);
  }
}

TEST_CASE("domain handling") {
  const EntropyDensity e = EntropyDensity::logistic(1);
  // boundary data uses the 0*log(0) convention
  CHECK(e.s(state1(0.0)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(e.s(state1(1.0)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(e.s(state1(-0.01)), std::domain_error);
  CHECK_THROWS_AS(e.grad_s(state1(1.01)), std::domain_error);

  const StateVec clamped = e.clamp_into_domain(state1(0.0), 1e-7);
  CHECK(clamped[0] == 1e-7);
  const EntropyDensity e2 = EntropyDensity::logistic(2);
  const StateVec c2 = e2.clamp_into_domain(state2(0.7, 0.5), 1e-7);
  CHECK(c2.sum() <= 1.0 - 1e-7 + 1e-15);
  CHECK(c2[0] / c2[1] == doctest::Approx(0.7 / 0.5).epsilon(1e-12));
}

TEST_CASE("scaled-log range is (0, n)") {
  const EntropyDensity e = EntropyDensity::scaled_log(2.0);
  CHECK(e.range_contains(state1(1.5)));
  CHECK(!e.range_contains(state1(2.0)));
  CHECK(!e.domain_contains(state1(1.5), 1e-14));  // hypothesis domain is (0,1)
  CHECK(e.domain_contains(state1(0.5), 1e-14));
}

TEST_CASE("boltzmann diagnostic entropy") {
  const EntropyDensity e = EntropyDensity::boltzmann();
  CHECK(e.s(state1(1.0)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(e.s(state1(0.5)) > 0.0);
  CHECK(e.s(state1(2.0)) > 0.0);
  // u = exp is unbounded: its range is not confined to (0,1)
  CHECK(e.u(state1(1.0))[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
}

TEST_CASE("quadratic debug family is the identity transform") {
  const EntropyDensity e = EntropyDensity::quadratic(2);
  const StateVec w = state2(0.3, -0.8);
  CHECK((e.u(w) - w).norm() == 0.0);
  CHECK(e.jac_u(w)(0, 0) == 1.0);
  CHECK(e.jac_u(w)(0, 1) == 0.0);
  CHECK(e.s(w) == doctest::Approx(0.5 * w.squaredNorm()));
}
