#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "crossdiff/fe_space.hpp"

using namespace crossdiff;

namespace {

StateVec scalar_state(double v) {
  StateVec s(1);
  s[0] = v;
  return s;
}

std::pair<double, double> random_ref_point(ElementKind kind, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (kind == ElementKind::Triangle) {
    double a = u(rng), b = u(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    return {a, b};
  }
  return {2.0 * u(rng) - 1.0, 2.0 * u(rng) - 1.0};
}

}  // namespace

TEST_CASE("dof counts") {
  const SpaceTimeMesh quad = build_cartesian(0.0, 1.0, 1.0, 1, 1);
  CHECK(build_space(quad, 1, 1).total_dofs() == 4);
  CHECK(build_space(quad, 2, 1).total_dofs() == 9);

  const SpaceTimeMesh tris = build_simplicial(0.0, 1.0, 1.0, 1, 1, SimplicialPattern::DiagonalNE);
  const FeSpace s = build_space(tris, 3, 2);
  CHECK(s.scalar_dofs == 16);  // 10 + 10 - (2 vertices + 2 edge dofs)
  CHECK(s.total_dofs() == 32);

  CHECK_THROWS_AS(build_space(quad, 7, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_space(quad, 0, 1), std::invalid_argument);
}

TEST_CASE("Kronecker property at Lagrange nodes") {
  for (auto kind : {ElementKind::Triangle, ElementKind::Quad})
    for (int p = 1; p <= 6; ++p) {
      const ReferenceBasis& rb = reference_basis(kind, p);
      Vector v;
      Eigen::Matrix<double, Eigen::Dynamic, 2> g;
      for (int m = 0; m < rb.size; ++m) {
        rb.eval(rb.nodes(m, 0), rb.nodes(m, 1), v, g);
        for (int i = 0; i < rb.size; ++i)
          CHECK(v[i] == doctest::Approx(i == m ? 1.0 : 0.0).epsilon(1e-11));
      }
    }
}

TEST_CASE("partition of unity and zero gradient sum") {
  std::mt19937 rng(42);
  for (auto kind : {ElementKind::Triangle, ElementKind::Quad})
    for (int p = 1; p <= 6; ++p) {
      const ReferenceBasis& rb = reference_basis(kind, p);
      Vector v;
      Eigen::Matrix<double, Eigen::Dynamic, 2> g;
      for (int trial = 0; trial < 100; ++trial) {
        const auto [xi, eta] = random_ref_point(kind, rng);
        rb.eval(xi, eta, v, g);
        CHECK(std::abs(v.sum() - 1.0) < 1e-13);
        CHECK(std::abs(g.col(0).sum()) < 1e-12);
        CHECK(std::abs(g.col(1).sum()) < 1e-12);
      }
    }
}

TEST_CASE("interpolation reproduces polynomials of admissible degree") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  for (auto pattern : {SimplicialPattern::CrissCross, SimplicialPattern::DiagonalNE}) {
    const SpaceTimeMesh mesh = build_simplicial(0.0, 1.0, 1.0, 2, 2, pattern);
    for (int p = 1; p <= 4; ++p) {
      const FeSpace space = build_space(mesh, p, 1);
      // random polynomial of total degree p
      std::vector<double> c;
      for (int a = 0; a <= p; ++a)
        for (int b = 0; a + b <= p; ++b) c.push_back(coeff(rng));
      auto poly = [&](double x, double t) {
        double acc = 0.0;
        int idx = 0;
        for (int a = 0; a <= p; ++a)
          for (int b = 0; a + b <= p; ++b) acc += c[idx++] * std::pow(x, a) * std::pow(t, b);
        return acc;
      };
      const Vector dofs =
          interpolate(space, [&](double x, double t) { return scalar_state(poly(x, t)); });
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      for (int trial = 0; trial < 50; ++trial) {
        const double x = u01(rng), t = u01(rng);
        const PointLocation loc = locate_point(mesh, x, t);
        const FieldValue fv = evaluate_field(space, dofs, loc.element, loc.xi, loc.eta);
        CHECK(std::abs(fv.value[0] - poly(x, t)) < 1e-12);
      }
    }
  }
}

TEST_CASE("interpolation basics") {
  const SpaceTimeMesh mesh = build_cartesian(0.0, 1.0, 1.0, 2, 2);
  const FeSpace space = build_space(mesh, 1, 1);
  const Vector c = interpolate(space, [](double, double) { return scalar_state(3.25); });
  for (int i = 0; i < c.size(); ++i) CHECK(c[i] == 3.25);

  // bilinear x*t is reproduced exactly by p=1 quads
  const Vector xt = interpolate(space, [](double x, double t) { return scalar_state(x * t); });
  const PointLocation loc = locate_point(mesh, 0.3, 0.7);
  CHECK(evaluate_field(space, xt, loc.element, loc.xi, loc.eta).value[0] ==
        doctest::Approx(0.21).epsilon(1e-13));

  CHECK_THROWS_AS(interpolate(space,
                              [](double x, double) {
                                return scalar_state(x > 0.4 ? std::nan("") : 0.0);
                              }),
                  NumericError);
}

TEST_CASE("field gradients") {
  const SpaceTimeMesh mesh = build_simplicial(0.0, 1.0, 1.0, 2, 2, SimplicialPattern::CrissCross);
  const FeSpace space = build_space(mesh, 1, 1);
  const Vector constant = interpolate(space, [](double, double) { return scalar_state(2.0); });
  const FieldValue c = evaluate_field(space, constant, 0, 0.25, 0.25);
  CHECK(std::abs(c.dx[0]) < 1e-13);
  CHECK(std::abs(c.dt[0]) < 1e-13);

  const Vector lin = interpolate(space, [](double x, double t) { return scalar_state(x + 2 * t); });
  for (int e = 0; e < mesh.num_elements(); e += 3) {
    const FieldValue fv = evaluate_field(space, lin, e, 0.2, 0.3);
    CHECK(fv.dx[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fv.dt[0] == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central finite differences") {
  const SpaceTimeMesh mesh = build_simplicial(0.2, 0.9, 0.8, 2, 2, SimplicialPattern::DiagonalNE);
  const FeSpace space = build_space(mesh, 3, 1);
  const Vector c = interpolate(space, [](double x, double t) {
    return scalar_state(std::sin(3 * x) * std::exp(t) + x * x * t);
  });
  const double delta = 1e-6;
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_real_distribution<double> ux(0.3, 0.8), ut(0.1, 0.7);
    const double x = ux(rng), t = ut(rng);
    const PointLocation loc = locate_point(mesh, x, t);
    const FieldValue fv = evaluate_field(space, c, loc.element, loc.xi, loc.eta);
    auto value_at = [&](double xx, double tt) {
      const Eigen::Vector2d ref = mesh.reference_coordinates(loc.element, xx, tt);
      return evaluate_field(space, c, loc.element, ref[0], ref[1]).value[0];
    };
    const double fd_x = (value_at(x + delta, t) - value_at(x - delta, t)) / (2 * delta);
    const double fd_t = (value_at(x, t + delta) - value_at(x, t - delta)) / (2 * delta);
    CHECK(fv.dx[0] == doctest::Approx(fd_x).epsilon(1e-6));
    CHECK(fv.dt[0] == doctest::Approx(fd_t).epsilon(1e-6));
  }
}

TEST_CASE("C0 continuity across interior edges") {
  std::mt19937 rng(11);
  const SpaceTimeMesh mesh = build_simplicial(0.0, 1.0, 1.0, 2, 2, SimplicialPattern::CrissCross);
  const FeSpace space = build_space(mesh, 3, 2);
  Vector coeffs(space.total_dofs());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < coeffs.size(); ++i) coeffs[i] = u(rng);

  std::map<std::pair<int, int>, std::vector<int>> edge_elems;
  for (int e = 0; e < mesh.num_elements(); ++e)
    for (int k = 0; k < 3; ++k) {
      auto [a, b] = mesh.edge_vertices(e, k);
      edge_elems[std::minmax(a, b)].push_back(e);
    }
  for (const auto& [edge, elems] : edge_elems) {
    if (elems.size() != 2) continue;
    const Node& na = mesh.nodes[edge.first];
    const Node& nb = mesh.nodes[edge.second];
    for (int s = 1; s <= 5; ++s) {
      const double lam = s / 6.0;
      const double x = (1 - lam) * na.x + lam * nb.x;
      const double t = (1 - lam) * na.t + lam * nb.t;
      StateVec values[2];
      for (int side = 0; side < 2; ++side) {
        const Eigen::Vector2d ref = mesh.reference_coordinates(elems[side], x, t);
        values[side] = evaluate_field(space, coeffs, elems[side], ref[0], ref[1]).value;
      }
      CHECK((values[0] - values[1]).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("trace quadrature") {
  const SpaceTimeMesh mesh = build_simplicial(0.0, 1.0, 1.0, 3, 2, SimplicialPattern::DiagonalNE);
  for (int p = 1; p <= 3; ++p) {
    const FeSpace space = build_space(mesh, p, 1);

    double weight_sum = 0.0, one_integral = 0.0, x_initial = 0.0, poly_integral = 0.0;
    for (const TracePoint& tp : trace_quadrature(space, FacetTag::FinalTime)) {
      weight_sum += tp.weight;
      one_integral += tp.weight * 1.0;
      poly_integral += tp.weight * std::pow(tp.x, 2 * p);
      CHECK(tp.t == 1.0);
    }
    for (const TracePoint& tp : trace_quadrature(space, FacetTag::InitialTime)) {
      x_initial += tp.weight * tp.x;
      CHECK(tp.t == 0.0);
    }
    CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(one_integral == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(x_initial == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(poly_integral == doctest::Approx(1.0 / (2 * p + 1)).epsilon(1e-12));

    CHECK_THROWS_AS(trace_quadrature(space, FacetTag::SpatialLeft), std::invalid_argument);
  }
}

TEST_CASE("l2 error") {
  const SpaceTimeMesh mesh = build_cartesian(0.0, 1.0, 1.0, 2, 2);
  const FeSpace space = build_space(mesh, 2, 1);
  auto id = [](const StateVec& v) { return v; };
  const Vector c =
      interpolate(space, [](double x, double t) { return scalar_state(x * x + t); });
  CHECK(l2_error(space, c, id, [](double x, double t) { return scalar_state(x * x + t); }) <
        1e-14);
  const Vector zero = Vector::Zero(space.total_dofs());
  CHECK(l2_error(space, zero, id, [](double, double) { return scalar_state(1.0); }) ==
        doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("time slice integral") {
  for (bool simplicial : {false, true}) {
    const SpaceTimeMesh mesh =
        simplicial ? build_simplicial(0.0, 2.0, 1.0, 3, 3, SimplicialPattern::CrissCross)
                   : build_cartesian(0.0, 2.0, 1.0, 3, 3);
    const FeSpace space = build_space(mesh, 2, 1);
    auto one = [](const StateVec&) { return 1.0; };
    for (double t0 : {0.0, 0.17, 1.0 / 3.0, 0.5, 1.0})
      CHECK(time_slice_integral(space, Vector::Zero(space.total_dofs()), t0, one) ==
            doctest::Approx(2.0).epsilon(1e-12));

    // t0 = 0 agrees with the trace-quadrature route.
    const Vector c = interpolate(
        space, [](double x, double t) { return scalar_state(x * x + std::cos(t + x)); });
    auto square = [](const StateVec& v) { return v[0] * v[0]; };
    double trace_value = 0.0;
    for (const TracePoint& tp : trace_quadrature(space, FacetTag::InitialTime)) {
      const FieldValue fv = evaluate_field(space, c, tp.element, tp.xi, tp.eta);
      trace_value += tp.weight * fv.value[0] * fv.value[0];
    }
    CHECK(time_slice_integral(space, c, 0.0, square) ==
          doctest::Approx(trace_value).epsilon(1e-12));

    // constant-in-time field: value independent of t0
    const Vector cx = interpolate(space, [](double x, double) { return scalar_state(x); });
    const double ref = time_slice_integral(space, cx, 0.4, square);
    for (double t0 : {0.0, 1.0 / 3.0, 0.77, 1.0})
      CHECK(time_slice_integral(space, cx, t0, square) == doctest::Approx(ref).epsilon(1e-12));

    // restricted window
    CHECK(time_slice_integral(space, Vector::Zero(space.total_dofs()), 0.5, one, 0.5, 1.5) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}
