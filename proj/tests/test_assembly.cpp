#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "crossdiff/assembly.hpp"

using namespace crossdiff;

namespace {

StateVec constant_state(int n, double v) { return StateVec::Constant(n, v); }

// Smooth in-range entropy-variable field for derivative checks.
Vector smooth_w(const FeSpace& space, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> amp(-0.6, 0.6), freq(1.0, 3.0);
  std::vector<double> a(space.components), kx(space.components), kt(space.components),
      shift(space.components);
  for (int c = 0; c < space.components; ++c) {
    a[c] = amp(rng);
    kx[c] = freq(rng);
    kt[c] = freq(rng);
    shift[c] = 0.3 * amp(rng) - 0.5;
  }
  return interpolate(space, [&](double x, double t) {
    StateVec w(space.components);
    for (int c = 0; c < space.components; ++c)
      w[c] = a[c] * std::sin(kx[c] * x + 0.3) * std::cos(kt[c] * t) + shift[c];
    return w;
  });
}

void check_fd_jacobian(const ResidualContext& ctx, const Vector& w, unsigned seed,
                       int directions = 20) {
  Vector residual;
  SparseMatrix jac;
  assemble(ctx, w, &residual, &jac);
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double delta = 1e-6;
  for (int d = 0; d < directions; ++d) {
    Vector v(w.size());
    for (int i = 0; i < v.size(); ++i) v[i] = normal(rng);
    v /= v.norm();
    Vector rp, rm;
    assemble(ctx, w + delta * v, &rp, nullptr);
    assemble(ctx, w - delta * v, &rm, nullptr);
    const Vector fd = (rp - rm) / (2.0 * delta);
    const Vector jv = jac * v;
    const double rel = (jv - fd).norm() / std::max({jv.norm(), fd.norm(), 1e-12});
    CHECK(rel < 1e-6);
  }
}

ResidualContext make_ctx(const FeSpace& space, const FeSpace* current,
                         const CrossDiffusionSystem& sys, double eps, Formulation form) {
  ResidualContext ctx;
  ctx.space = &space;
  ctx.current_space = current;
  ctx.system = &sys;
  ctx.config.epsilon = eps;
  ctx.config.formulation = form;
  const int n = sys.components;
  ctx.rho0 = [n](double x) {
    StateVec r = constant_state(n, 0.3 / n);
    r[0] += 0.1 * std::sin(2 * x);
    return r;
  };
  return ctx;
}

}  // namespace

TEST_CASE("H1_eps product matrix") {
  const SpaceTimeMesh mesh = build_cartesian(0.0, 1.0, 1.0, 2, 2);
  const FeSpace space = build_space(mesh, 2, 1);

  // constant pair with eps = 0: the mass term gives |Q_T|
  const SparseMatrix g0 = h1_eps_product_matrix(space, 0.0);
  const Vector ones = Vector::Ones(space.total_dofs());
  CHECK(ones.dot(g0 * ones) == doctest::Approx(1.0).epsilon(1e-13));

  // w = t with eps = 1: 1/3 + 0 + 1 = 4/3
  const SparseMatrix g1 = h1_eps_product_matrix(space, 1.0);
  const Vector wt = interpolate(space, [](double, double t) { return constant_state(1, t); });
  CHECK(wt.dot(g1 * wt) == doctest::Approx(4.0 / 3.0).epsilon(1e-13));

  // symmetric positive semidefinite
  std::mt19937 rng(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vector x(space.total_dofs());
    for (int i = 0; i < x.size(); ++i) x[i] = normal(rng);
    CHECK(x.dot(g1 * x) >= -1e-12);
  }
  const SparseMatrix diff = SparseMatrix(g1 - SparseMatrix(g1.transpose()));
  CHECK(diff.coeffs().cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("constant steady state leaves only the regularization residual") {
  const SpaceTimeMesh mesh = build_simplicial(0.0, 1.0, 1.0, 2, 2, SimplicialPattern::CrissCross);
  const FeSpace space = build_space(mesh, 2, 1);
  const CrossDiffusionSystem sys = heat();

  ResidualContext ctx;
  ctx.space = &space;
  ctx.system = &sys;
  const StateVec wbar = sys.entropy.grad_s(constant_state(1, 0.37));
  ctx.rho0 = [&](double) { return constant_state(1, 0.37); };

  const Vector w = Vector::Constant(space.total_dofs(), wbar[0]);
  ctx.config.epsilon = 0.0;
  CHECK(residual_primal(ctx, w).cwiseAbs().maxCoeff() < 1e-13);

  ctx.config.epsilon = 0.25;
  const Vector r = residual_primal(ctx, w);
  const SparseMatrix g = h1_eps_product_matrix(space, 0.25);
  CHECK((r - 0.25 * (g * w)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("constant test functions give the mass balance identity") {
  const SpaceTimeMesh mesh = build_simplicial(0.0, 1.0, 1.0, 3, 2, SimplicialPattern::DiagonalNE);
  const FeSpace space = build_space(mesh, 2, 1);
  const CrossDiffusionSystem sys = heat();  // f = 0
  ResidualContext ctx = make_ctx(space, nullptr, sys, 0.125, Formulation::Primal);
  const Vector w = smooth_w(space, 21);

  const Vector r = residual_primal(ctx, w);
  const Vector e = Vector::Ones(space.total_dofs());

  double expected = 0.0;
  for (const TracePoint& tp : trace_quadrature(space, FacetTag::FinalTime)) {
    const FieldValue fv = evaluate_field(space, w, tp.element, tp.xi, tp.eta);
    expected += tp.weight * sys.entropy.u(fv.value)[0];
  }
  for (const TracePoint& tp : trace_quadrature(space, FacetTag::InitialTime))
    expected -= tp.weight * ctx.rho0(tp.x)[0];
  const SparseMatrix g = h1_eps_product_matrix(space, 0.125);
  expected += 0.125 * e.dot(g * w);

  CHECK(r.dot(e) == doctest::Approx(expected).epsilon(1e-11));
}

TEST_CASE("epsilon term contributes exactly the product matrix") {
  const SpaceTimeMesh mesh = build_cartesian(0.0, 1.0, 1.0, 2, 2);
  const FeSpace space = build_space(mesh, 2, 1);
  const CrossDiffusionSystem sys = heat();
  const Vector w = smooth_w(space, 4);

  ResidualContext ctx0 = make_ctx(space, nullptr, sys, 0.0, Formulation::Primal);
  ResidualContext ctx1 = make_ctx(space, nullptr, sys, 0.35, Formulation::Primal);
  const SparseMatrix j0 = jacobian_primal(ctx0, w);
  const SparseMatrix j1 = jacobian_primal(ctx1, w);
  const SparseMatrix g = h1_eps_product_matrix(space, 0.35);
  const SparseMatrix diff = SparseMatrix(j1 - j0 - SparseMatrix(0.35 * g));
  CHECK(diff.coeffs().cwiseAbs().maxCoeff() < 1e-12);

  const Vector dr = residual_primal(ctx1, w) - residual_primal(ctx0, w);
  CHECK((dr - 0.35 * (g * w)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("consistency decay at the interpolated exact solution") {
  // Interpolating s'(rho_exact) of a heat-style manufactured solution must
  // make the residual vanish as the mesh is refined. The amplitude is kept
  // at 0.45 so the entropy variable stays smooth (no log singularities).
  const double tau = 7.0;
  const CrossDiffusionSystem sys = scaled_heat(1.0 / tau);
  auto exact = [&](double x, double t) {
    return constant_state(1, 0.45 * std::exp(-4.0 * M_PI * M_PI * t / tau) * std::cos(2 * M_PI * x) + 0.5);
  };
  double previous = -1.0;
  SpaceTimeMesh mesh = build_simplicial(0.0, 1.0, 1.0, 4, 4, SimplicialPattern::DiagonalNE);
  for (int level = 0; level < 3; ++level) {
    const FeSpace space = build_space(mesh, 2, 1);
    ResidualContext ctx;
    ctx.space = &space;
    ctx.system = &sys;
    ctx.rho0 = [&](double x) { return exact(x, 0.0); };
    const Vector w = interpolate(
        space, [&](double x, double t) { return sys.entropy.grad_s(exact(x, t)); });
    const double norm = residual_primal(ctx, w).cwiseAbs().maxCoeff();
    if (previous > 0.0) CHECK(norm < 0.4 * previous);  // O(h^p) consistency, p = 2
    previous = norm;
    mesh = uniform_refine(mesh);
  }
}

TEST_CASE("primal Jacobian matches finite differences for all systems") {
  const SpaceTimeMesh tri = build_simplicial(0.0, 1.0, 1.0, 2, 2, SimplicialPattern::CrissCross);
  const SpaceTimeMesh quad = build_cartesian(0.0, 1.0, 1.0, 3, 2);

  int seed = 100;
  for (const CrossDiffusionSystem& sys :
       {heat(), porous_medium(1.5), fisher_kpp(0.8, 2.0), duncan_toor_system()}) {
    for (const SpaceTimeMesh* mesh : {&tri, &quad}) {
      const FeSpace space = build_space(*mesh, 2, sys.components);
      ResidualContext ctx = make_ctx(space, nullptr, sys, 1e-3, Formulation::Primal);
      check_fd_jacobian(ctx, smooth_w(space, seed), seed, 10);
      ++seed;
    }
  }
}

TEST_CASE("mixed Jacobian matches finite differences for all systems") {
  const SpaceTimeMesh mesh = build_cartesian(0.0, 1.0, 1.0, 2, 2);
  int seed = 200;
  for (const CrossDiffusionSystem& sys :
       {heat(), porous_medium(1.5), fisher_kpp(0.8, 2.0), duncan_toor_system()}) {
    const FeSpace space = build_space(mesh, 2, sys.components);
    const FeSpace current = build_space(mesh, 2, sys.components);
    ResidualContext ctx = make_ctx(space, &current, sys, 1e-3,
                                   Formulation::MixedImplicitCurrent);
    Vector wj = Vector::Zero(ctx.total_dofs());
    wj.head(space.total_dofs()) = smooth_w(space, seed);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int i = space.total_dofs(); i < wj.size(); ++i) wj[i] = u(rng);
    check_fd_jacobian(ctx, wj, seed, 10);
    ++seed;
  }
}

TEST_CASE("Nitsche terms pass the finite-difference check") {
  const SpaceTimeMesh mesh = build_cartesian(0.0, 1.0, 1.0, 2, 2);
  DirichletConfig dirichlet;
  dirichlet.eta = 1.0;
  dirichlet.data = [](double x, double) { return constant_state(1, 0.4 + 0.1 * x); };

  const CrossDiffusionSystem sys = heat();
  const FeSpace space = build_space(mesh, 2, 1);
  ResidualContext ctx = make_ctx(space, nullptr, sys, 0.0, Formulation::Primal);
  ctx.config.dirichlet = dirichlet;
  check_fd_jacobian(ctx, smooth_w(space, 300), 300, 10);

  const CrossDiffusionSystem ms = duncan_toor_system();
  DirichletConfig dirichlet2;
  dirichlet2.data = [](double, double) { return constant_state(2, 0.3); };
  const FeSpace wspace = build_space(mesh, 2, 2);
  const FeSpace jspace = build_space(mesh, 2, 2);
  ResidualContext mctx = make_ctx(wspace, &jspace, ms, 1e-4, Formulation::MixedImplicitCurrent);
  mctx.config.dirichlet = dirichlet2;
  Vector wj = Vector::Zero(mctx.total_dofs());
  wj.head(wspace.total_dofs()) = smooth_w(wspace, 301);
  check_fd_jacobian(mctx, wj, 301, 10);
}

TEST_CASE("mixed residual at a constant state") {
  const SpaceTimeMesh mesh = build_cartesian(0.0, 1.0, 1.0, 2, 2);
  const CrossDiffusionSystem sys = duncan_toor_system();
  const FeSpace space = build_space(mesh, 2, 2);
  const FeSpace current = build_space(mesh, 2, 2);

  ResidualContext ctx;
  ctx.space = &space;
  ctx.current_space = &current;
  ctx.system = &sys;
  ctx.config.formulation = Formulation::MixedImplicitCurrent;
  ctx.config.epsilon = 0.125;
  const StateVec rho_bar = constant_state(2, 0.25);
  ctx.rho0 = [&](double) { return rho_bar; };
  const StateVec wbar = sys.entropy.grad_s(rho_bar);

  Vector wj = Vector::Zero(ctx.total_dofs());
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < space.scalar_dofs; ++i) wj[space.dof(c, i)] = wbar[c];

  const Vector r = residual_mixed(ctx, wj);
  // J-block residual vanishes (d_x w = 0 and J = 0)
  CHECK(r.tail(current.total_dofs()).cwiseAbs().maxCoeff() < 1e-13);
  // w-block residual equals the regularization term
  const SparseMatrix g = h1_eps_product_matrix(space, 0.125);
  const Vector reg = 0.125 * (g * wj.head(space.total_dofs()));
  CHECK((r.head(space.total_dofs()) - reg).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("current-current block matches its definition") {
  const SpaceTimeMesh mesh = build_cartesian(0.0, 1.0, 1.0, 2, 1);
  const CrossDiffusionSystem sys = duncan_toor_system();
  const FeSpace space = build_space(mesh, 1, 2);
  const FeSpace current = build_space(mesh, 1, 2);
  ResidualContext ctx = make_ctx(space, &current, sys, 0.0, Formulation::MixedImplicitCurrent);

  Vector wj = Vector::Zero(ctx.total_dofs());
  wj.head(space.total_dofs()) = smooth_w(space, 17);
  const SparseMatrix jac = jacobian_mixed(ctx, wj);

  // Independent assembly of int phi_m G(w) phi_k over the current space.
  const int off = space.total_dofs();
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(current.total_dofs(), current.total_dofs());
  const int degree = ctx.volume_quadrature_degree();
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const QuadratureRule& rule = quadrature(ElementKind::Quad, degree);
    for (int q = 0; q < rule.size(); ++q) {
      const double xi = rule.points(q, 0), eta = rule.points(q, 1);
      const double wq = rule.weights[q] * mesh.jacobian(e, xi, eta).determinant();
      const FieldValue wv = evaluate_field(space, wj.head(off), e, xi, eta);
      const StateVec u = sys.entropy.u(wv.value);
      const StateMat G = sys.entropy.hess_s(u) * sys.mixed_M(u);
      Vector phi;
      Eigen::Matrix<double, Eigen::Dynamic, 2> grad;
      current.basis(e).eval(xi, eta, phi, grad);
      const auto& dofs = current.element_dofs[e];
      for (int c = 0; c < 2; ++c)
        for (int j = 0; j < 2; ++j)
          for (size_t m = 0; m < dofs.size(); ++m)
            for (size_t k = 0; k < dofs.size(); ++k)
              expected(current.dof(c, dofs[m]), current.dof(j, dofs[k])) +=
                  wq * phi[m] * G(c, j) * phi[k];
    }
  }
  for (int m = 0; m < current.total_dofs(); ++m)
    for (int k = 0; k < current.total_dofs(); ++k)
      CHECK(jac.coeff(off + m, off + k) == doctest::Approx(expected(m, k)).epsilon(1e-12));
}

TEST_CASE("local elimination of the current recovers the primal flux") {
  // Solve the J-block for J given w; the result approximates -A(u) d_x u(w)
  // with an error that shrinks under refinement.
  const CrossDiffusionSystem sys = heat();
  double previous = -1.0;
  for (int nx : {4, 8}) {
    const SpaceTimeMesh mesh = build_cartesian(0.0, 1.0, 1.0, nx, nx);
    const FeSpace space = build_space(mesh, 2, 1);
    const FeSpace current = build_space(mesh, 2, 1);
    ResidualContext ctx = make_ctx(space, &current, sys, 0.0, Formulation::MixedImplicitCurrent);
    Vector wj = Vector::Zero(ctx.total_dofs());
    wj.head(space.total_dofs()) = interpolate(space, [](double x, double t) {
      return constant_state(1, 0.4 * std::sin(2 * x + t) - 0.1);
    });

    const int off = space.total_dofs();
    const Vector r = residual_mixed(ctx, wj);
    const SparseMatrix jac = jacobian_mixed(ctx, wj);
    Eigen::MatrixXd jj(current.total_dofs(), current.total_dofs());
    for (int m = 0; m < current.total_dofs(); ++m)
      for (int k = 0; k < current.total_dofs(); ++k) jj(m, k) = jac.coeff(off + m, off + k);
    const Vector jsol = jj.fullPivLu().solve(Vector(-r.tail(current.total_dofs())));

    double num = 0.0, den = 0.0;
    for (int e = 0; e < mesh.num_elements(); ++e) {
      const QuadratureRule& rule = quadrature(ElementKind::Quad, 6);
      for (int q = 0; q < rule.size(); ++q) {
        const double xi = rule.points(q, 0), eta = rule.points(q, 1);
        const double wq = rule.weights[q] * mesh.jacobian(e, xi, eta).determinant();
        const FieldValue wv = evaluate_field(space, wj.head(off), e, xi, eta);
        const FieldValue jv = evaluate_field(current, jsol, e, xi, eta);
        const StateVec u = sys.entropy.u(wv.value);
        const StateVec flux = -(sys.diffusion(u) * sys.entropy.jac_u_from_value(u)) * wv.dx;
        num += wq * (jv.value - flux).squaredNorm();
        den += wq * flux.squaredNorm();
      }
    }
    const double rel = std::sqrt(num / den);
    if (previous > 0.0) CHECK(rel < 0.5 * previous);
    CHECK(rel < 0.05);
    previous = rel;
  }
}

TEST_CASE("boundedness audit sees no violations") {
  const SpaceTimeMesh mesh = build_simplicial(0.0, 1.0, 1.0, 2, 2, SimplicialPattern::DiagonalNE);
  const CrossDiffusionSystem sys = duncan_toor_system();
  const FeSpace space = build_space(mesh, 2, 2);
  ResidualContext ctx = make_ctx(space, nullptr, sys, 0.0, Formulation::Primal);
  const BoundednessAudit audit = audit_boundedness(ctx, smooth_w(space, 99));
  CHECK(audit.total > 0);
  CHECK(audit.violations == 0);
}
