#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crossdiff/quadrature.hpp"

using namespace crossdiff;

namespace {

double factorial(int n) {
  double r = 1.0;
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

// Exact monomial integrals: unit triangle int x^a y^b = a! b! / (a+b+2)!.
double triangle_monomial(int a, int b) {
  return factorial(a) * factorial(b) / factorial(a + b + 2);
}

double square_monomial(int a, int b) {
  auto one_d = [](int k) { return k % 2 == 0 ? 2.0 / (k + 1) : 0.0; };
  return one_d(a) * one_d(b);
}

}  // namespace

TEST_CASE("Gauss-Legendre rules integrate monomials exactly") {
  for (int n = 1; n <= 10; ++n) {
    Vector nodes, weights;
    gauss_legendre(n, nodes, weights);
    REQUIRE(nodes.size() == n);
    CHECK(weights.minCoeff() > 0.0);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += weights[i] * std::pow(nodes[i], k);
      const double exact = k % 2 == 0 ? 2.0 / (k + 1) : 0.0;
      CHECK(acc == doctest::Approx(exact).epsilon(1e-13));
    }
  }
}

TEST_CASE("triangle rules are positive and exact to the declared degree") {
  for (int degree = 1; degree <= 14; ++degree) {
    const QuadratureRule& rule = quadrature(ElementKind::Triangle, degree);
    CHECK(rule.weights.minCoeff() > 0.0);
    CHECK(rule.weights.sum() == doctest::Approx(0.5).epsilon(1e-14));
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b) {
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q)
          acc += rule.weights[q] * std::pow(rule.points(q, 0), a) * std::pow(rule.points(q, 1), b);
        CHECK(acc == doctest::Approx(triangle_monomial(a, b)).epsilon(1e-12));
      }
  }
}

TEST_CASE("quad rules are exact per-variable") {
  for (int degree = 1; degree <= 14; ++degree) {
    const QuadratureRule& rule = quadrature(ElementKind::Quad, degree);
    CHECK(rule.weights.minCoeff() > 0.0);
    CHECK(rule.weights.sum() == doctest::Approx(4.0).epsilon(1e-14));
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; b <= degree; ++b) {
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q)
          acc += rule.weights[q] * std::pow(rule.points(q, 0), a) * std::pow(rule.points(q, 1), b);
        CHECK(acc == doctest::Approx(square_monomial(a, b)).epsilon(1e-12));
      }
  }
}
