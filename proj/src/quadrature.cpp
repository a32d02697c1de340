#include "crossdiff/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace crossdiff {

void gauss_legendre(int n, Vector& nodes, Vector& weights) {
  nodes.resize(n);
  weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

void gauss_for_degree(int degree, Vector& nodes, Vector& weights) {
  const int n = std::max(1, (degree + 2) / 2);
  gauss_legendre(n, nodes, weights);
}

namespace {

QuadratureRule make_quad_rule(int degree) {
  Vector gn, gw;
  gauss_for_degree(degree, gn, gw);
  const int n = static_cast<int>(gn.size());
  QuadratureRule rule;
  rule.degree = degree;
  rule.points.resize(n * n, 2);
  rule.weights.resize(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      rule.points(i * n + j, 0) = gn[i];
      rule.points(i * n + j, 1) = gn[j];
      rule.weights[i * n + j] = gw[i] * gw[j];
    }
  return rule;
}

// Conical-product rule on the unit triangle: x = u(1-v), y = v with the
// Jacobian (1-v) absorbed into the weight. All weights stay positive and the
// rule is exact for any requested total degree, which the basis tests verify.
QuadratureRule make_triangle_rule(int degree) {
  Vector un, uw, vn, vw;
  gauss_for_degree(degree, un, uw);
  gauss_for_degree(degree + 1, vn, vw);  // the (1-v) factor raises the degree by one
  const int nu = static_cast<int>(un.size());
  const int nv = static_cast<int>(vn.size());
  QuadratureRule rule;
  rule.degree = degree;
  rule.points.resize(nu * nv, 2);
  rule.weights.resize(nu * nv);
  int q = 0;
  for (int i = 0; i < nu; ++i) {
    const double u = 0.5 * (un[i] + 1.0);
    for (int j = 0; j < nv; ++j, ++q) {
      const double v = 0.5 * (vn[j] + 1.0);
      rule.points(q, 0) = u * (1.0 - v);
      rule.points(q, 1) = v;
      rule.weights[q] = 0.25 * uw[i] * vw[j] * (1.0 - v);
    }
  }
  return rule;
}

}  // namespace

const QuadratureRule& quadrature(ElementKind kind, int degree) {
  static std::map<std::pair<int, int>, QuadratureRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  const auto key = std::make_pair(static_cast<int>(kind), degree);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache
             .emplace(key, kind == ElementKind::Quad ? make_quad_rule(degree)
                                                     : make_triangle_rule(degree))
             .first;
  }
  return it->second;
}

}  // namespace crossdiff
