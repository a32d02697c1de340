#include "crossdiff/assembly.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "crossdiff/dual.hpp"

namespace crossdiff {

namespace {

struct BasisTable {
  Eigen::MatrixXd val;   // nqp x nb
  Eigen::MatrixXd dxi;   // nqp x nb
  Eigen::MatrixXd deta;  // nqp x nb
};

const BasisTable& basis_table(ElementKind kind, int order, int degree) {
  static std::map<std::tuple<int, int, int>, BasisTable> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  const auto key = std::make_tuple(static_cast<int>(kind), order, degree);
  auto it = cache.find(key);
  if (it == cache.end()) {
    const ReferenceBasis& rb = reference_basis(kind, order);
    const QuadratureRule& rule = quadrature(kind, degree);
    BasisTable table;
    table.val.resize(rule.size(), rb.size);
    table.dxi.resize(rule.size(), rb.size);
    table.deta.resize(rule.size(), rb.size);
    Vector v;
    Eigen::Matrix<double, Eigen::Dynamic, 2> g;
    for (int q = 0; q < rule.size(); ++q) {
      rb.eval(rule.points(q, 0), rule.points(q, 1), v, g);
      table.val.row(q) = v.transpose();
      table.dxi.row(q) = g.col(0).transpose();
      table.deta.row(q) = g.col(1).transpose();
    }
    it = cache.emplace(key, std::move(table)).first;
  }
  return it->second;
}

// B(w) = A(u(w)) u'(w) and, on request, its directional derivatives dB/dw_j.
// Closed form for the scalar systems, dual numbers for Maxwell-Stefan.
struct PointState {
  StateVec u;
  StateMat jac_u;
  StateMat B;
  StateMat dB[kMaxComponents];
};

void compute_point_state(const CrossDiffusionSystem& sys, const StateVec& w, bool with_derivative,
                         PointState& out) {
  const EntropyDensity& ent = sys.entropy;
  const int n = sys.components;
  out.u = ent.u(w);
  out.jac_u = ent.jac_u_from_value(out.u);

  if (n == 1 && sys.has_closed_dA()) {
    const double a = sys.diffusion(out.u)(0, 0);
    out.B = StateMat(1, 1);
    out.B(0, 0) = a * out.jac_u(0, 0);
    if (with_derivative) {
      const double da = sys.diffusion_derivative(out.u, 0)(0, 0);
      const double ju = out.jac_u(0, 0);
      out.dB[0] = StateMat(1, 1);
      out.dB[0](0, 0) = da * ju * ju + a * ent.jac_u_derivative_1d(out.u[0]);
    }
    return;
  }

  // Dual-number path: differentiate A(u(w)) u'(w) through u one direction at
  // a time. Value channels reproduce the unguarded evaluation of u.
  out.B = StateMat(n, n);
  const int passes = with_derivative ? n : 1;
  for (int dir = 0; dir < passes; ++dir) {
    Dual wd[kMaxComponents], ud[kMaxComponents];
    Dual jud[kMaxComponents * kMaxComponents], ad[kMaxComponents * kMaxComponents];
    for (int i = 0; i < n; ++i) wd[i] = Dual(w[i], i == dir ? 1.0 : 0.0);
    ent.u_generic(wd, ud);
    ent.jac_u_from_value_generic(ud, jud);
    sys.diffusion_generic(ud, ad);
    StateMat db(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Dual acc;
        for (int k = 0; k < n; ++k) acc += ad[i * n + k] * jud[k * n + j];
        if (dir == 0) out.B(i, j) = acc.v;
        db(i, j) = acc.d;
      }
    if (with_derivative) out.dB[dir] = db;
  }
}

// G(w) = s''(u(w)) M(u(w)) for the mixed scheme, with dual derivatives.
struct MixedPointState {
  StateMat G;
  StateMat dG[kMaxComponents];
};

void compute_mixed_state(const CrossDiffusionSystem& sys, const StateVec& w, bool with_derivative,
                         MixedPointState& out) {
  const EntropyDensity& ent = sys.entropy;
  const int n = sys.components;
  out.G = StateMat(n, n);
  const int passes = with_derivative ? n : 1;
  for (int dir = 0; dir < passes; ++dir) {
    Dual wd[kMaxComponents], ud[kMaxComponents];
    Dual hd[kMaxComponents * kMaxComponents], md[kMaxComponents * kMaxComponents];
    for (int i = 0; i < n; ++i) wd[i] = Dual(w[i], i == dir ? 1.0 : 0.0);
    ent.u_generic(wd, ud);
    ent.hess_generic(ud, hd);
    sys.mixed_M_generic(ud, md);
    StateMat dg(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Dual acc;
        for (int k = 0; k < n; ++k) acc += hd[i * n + k] * md[k * n + j];
        if (dir == 0) out.G(i, j) = acc.v;
        dg(i, j) = acc.d;
      }
    if (with_derivative) out.dG[dir] = dg;
  }
}

struct EdgePoint {
  double xi, eta;
  double weight;  // physical 1D measure
  double x, t;
};

std::vector<EdgePoint> edge_points(const SpaceTimeMesh& mesh, int element, int local_edge,
                                   int degree) {
  Vector gn, gw;
  gauss_for_degree(degree, gn, gw);
  const Element& el = mesh.elements[element];
  auto vertex_ref = [&](int lv) -> Eigen::Vector2d {
    if (el.kind == ElementKind::Triangle) {
      static const double refs[3][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
      return {refs[lv][0], refs[lv][1]};
    }
    static const double refs[4][2] = {{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}};
    return {refs[lv][0], refs[lv][1]};
  };
  const Eigen::Vector2d ra = vertex_ref(local_edge);
  const Eigen::Vector2d rb = vertex_ref((local_edge + 1) % el.nvert());
  auto [a, b] = mesh.edge_vertices(element, local_edge);
  const Node& na = mesh.nodes[a];
  const Node& nb = mesh.nodes[b];
  const double len = std::hypot(nb.x - na.x, nb.t - na.t);
  std::vector<EdgePoint> pts(gn.size());
  for (int q = 0; q < gn.size(); ++q) {
    const double s0 = 0.5 * (1.0 - gn[q]);
    const double s1 = 0.5 * (1.0 + gn[q]);
    pts[q] = {s0 * ra[0] + s1 * rb[0], s0 * ra[1] + s1 * rb[1], 0.5 * len * gw[q],
              s0 * na.x + s1 * nb.x, s0 * na.t + s1 * nb.t};
  }
  return pts;
}

double spatial_width(const SpaceTimeMesh& mesh, int element) {
  const Element& el = mesh.elements[element];
  double lo = 1e300, hi = -1e300;
  for (int k = 0; k < el.nvert(); ++k) {
    lo = std::min(lo, mesh.nodes[el.v[k]].x);
    hi = std::max(hi, mesh.nodes[el.v[k]].x);
  }
  return hi - lo;
}

class Accumulator {
 public:
  Accumulator(int n, Vector* residual, std::vector<Eigen::Triplet<double>>* triplets)
      : residual_(residual), triplets_(triplets) {
    if (residual_) residual_->setZero(n);
  }
  void add_residual(int row, double v) { (*residual_)[row] += v; }
  void add_jacobian(int row, int col, double v) {
    if (triplets_) triplets_->emplace_back(row, col, v);
  }
  bool with_jacobian() const { return triplets_ != nullptr; }
  bool with_residual() const { return residual_ != nullptr; }

 private:
  Vector* residual_;
  std::vector<Eigen::Triplet<double>>* triplets_;
};

StateVec gather_value(const FeSpace& space, const Vector& coeffs, const std::vector<int>& dofs,
                      const Eigen::MatrixXd& table, int q, int offset) {
  StateVec v = StateVec::Zero(space.components);
  for (int c = 0; c < space.components; ++c)
    for (size_t m = 0; m < dofs.size(); ++m)
      v[c] += coeffs[offset + space.dof(c, dofs[m])] * table(q, static_cast<int>(m));
  return v;
}

void check_finite(double v, int element) {
  if (!std::isfinite(v)) throw NumericError("non-finite value in assembly", element);
}

}  // namespace

SparseMatrix h1_eps_product_matrix(const FeSpace& space, double epsilon) {
  if (epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");
  const SpaceTimeMesh& mesh = *space.mesh;
  std::vector<Eigen::Triplet<double>> triplets;
  const int degree = 2 * space.order + 2;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const ElementKind kind = mesh.elements[e].kind;
    const QuadratureRule& rule = quadrature(kind, degree);
    const BasisTable& table = basis_table(kind, space.order, degree);
    const auto& dofs = space.element_dofs[e];
    const int nb = static_cast<int>(dofs.size());
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(nb, nb);
    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::Matrix2d J = mesh.jacobian(e, rule.points(q, 0), rule.points(q, 1));
      const Eigen::Matrix2d Jinv = J.inverse();
      const double w = rule.weights[q] * J.determinant();
      for (int m = 0; m < nb; ++m) {
        const double dxm = Jinv(0, 0) * table.dxi(q, m) + Jinv(1, 0) * table.deta(q, m);
        const double dtm = Jinv(0, 1) * table.dxi(q, m) + Jinv(1, 1) * table.deta(q, m);
        for (int k = 0; k < nb; ++k) {
          const double dxk = Jinv(0, 0) * table.dxi(q, k) + Jinv(1, 0) * table.deta(q, k);
          const double dtk = Jinv(0, 1) * table.dxi(q, k) + Jinv(1, 1) * table.deta(q, k);
          local(m, k) +=
              w * (table.val(q, m) * table.val(q, k) + dxm * dxk + epsilon * dtm * dtk);
        }
      }
    }
    for (int c = 0; c < space.components; ++c)
      for (int m = 0; m < nb; ++m)
        for (int k = 0; k < nb; ++k)
          triplets.emplace_back(space.dof(c, dofs[m]), space.dof(c, dofs[k]), local(m, k));
  }
  SparseMatrix G(space.total_dofs(), space.total_dofs());
  G.setFromTriplets(triplets.begin(), triplets.end());
  return G;
}

namespace {

// Shared volume/boundary assembly for the primal scheme.
void assemble_primal_impl(const ResidualContext& ctx, const Vector& w, Accumulator& acc) {
  const FeSpace& space = *ctx.space;
  const SpaceTimeMesh& mesh = *space.mesh;
  const CrossDiffusionSystem& sys = *ctx.system;
  const EntropyDensity& ent = sys.entropy;
  const int N = sys.components;
  const int degree = ctx.volume_quadrature_degree();
  const double eps = ctx.config.epsilon;
  const bool with_jac = acc.with_jacobian();

  std::vector<double> dxphi, dtphi;
  PointState ps;

  for (int e = 0; e < mesh.num_elements(); ++e) {
    const ElementKind kind = mesh.elements[e].kind;
    const QuadratureRule& rule = quadrature(kind, degree);
    const BasisTable& table = basis_table(kind, space.order, degree);
    const auto& dofs = space.element_dofs[e];
    const int nb = static_cast<int>(dofs.size());
    dxphi.resize(nb);
    dtphi.resize(nb);

    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::Matrix2d J = mesh.jacobian(e, rule.points(q, 0), rule.points(q, 1));
      const Eigen::Matrix2d Jinv = J.inverse();
      const double wq = rule.weights[q] * J.determinant();
      for (int m = 0; m < nb; ++m) {
        dxphi[m] = Jinv(0, 0) * table.dxi(q, m) + Jinv(1, 0) * table.deta(q, m);
        dtphi[m] = Jinv(0, 1) * table.dxi(q, m) + Jinv(1, 1) * table.deta(q, m);
      }
      StateVec wv = StateVec::Zero(N), dxw = StateVec::Zero(N), dtw = StateVec::Zero(N);
      for (int c = 0; c < N; ++c)
        for (int m = 0; m < nb; ++m) {
          const double a = w[space.dof(c, dofs[m])];
          wv[c] += a * table.val(q, m);
          dxw[c] += a * dxphi[m];
          dtw[c] += a * dtphi[m];
        }
      check_finite(wv.sum() + dxw.sum() + dtw.sum(), e);

      compute_point_state(sys, wv, with_jac, ps);
      const StateVec f = sys.reaction(ps.u);
      const StateMat df_jac =
          with_jac ? StateMat(sys.reaction_jacobian(ps.u) * ps.jac_u) : StateMat();
      const StateVec Bdxw = ps.B * dxw;

      if (acc.with_residual()) {
        for (int c = 0; c < N; ++c)
          for (int m = 0; m < nb; ++m) {
            double r = -dtphi[m] * ps.u[c] + dxphi[m] * Bdxw[c] - table.val(q, m) * f[c];
            if (eps > 0.0)
              r += eps * (table.val(q, m) * wv[c] + dxphi[m] * dxw[c] +
                          eps * dtphi[m] * dtw[c]);
            acc.add_residual(space.dof(c, dofs[m]), wq * r);
          }
      }
      if (with_jac) {
        StateMat dB_dxw(N, N);  // column j: sum_n dB[j](c,n) dxw[n]
        for (int j = 0; j < N; ++j) dB_dxw.col(j) = ps.dB[j] * dxw;
        for (int c = 0; c < N; ++c)
          for (int m = 0; m < nb; ++m) {
            const int row = space.dof(c, dofs[m]);
            for (int j = 0; j < N; ++j)
              for (int k = 0; k < nb; ++k) {
                double v = -dtphi[m] * ps.jac_u(c, j) * table.val(q, k) +
                           dxphi[m] * (dB_dxw(c, j) * table.val(q, k) + ps.B(c, j) * dxphi[k]) -
                           table.val(q, m) * df_jac(c, j) * table.val(q, k);
                if (eps > 0.0 && j == c)
                  v += eps * (table.val(q, m) * table.val(q, k) + dxphi[m] * dxphi[k] +
                              eps * dtphi[m] * dtphi[k]);
                acc.add_jacobian(row, space.dof(j, dofs[k]), wq * v);
              }
          }
      }
    }
  }

  // Trace terms at t = T (nonlinear) and t = 0 (data).
  const int edge_degree = 2 * space.order + 2;
  Vector bv;
  Eigen::Matrix<double, Eigen::Dynamic, 2> bg;
  const ReferenceBasis* rb_cache = nullptr;
  ElementKind rb_kind{};
  auto basis_at = [&](int element, double xi, double eta) -> const Vector& {
    const ElementKind kind = mesh.elements[element].kind;
    if (!rb_cache || kind != rb_kind) {
      rb_cache = &reference_basis(kind, space.order);
      rb_kind = kind;
    }
    rb_cache->eval(xi, eta, bv, bg);
    return bv;
  };

  for (const BoundaryFacet& facet : mesh.facets) {
    const int e = facet.element;
    const auto& dofs = space.element_dofs[e];
    const int nb = static_cast<int>(dofs.size());
    const auto pts = edge_points(mesh, e, facet.local_edge, edge_degree);

    if (facet.tag == FacetTag::FinalTime) {
      for (const EdgePoint& ep : pts) {
        const Vector& phi = basis_at(e, ep.xi, ep.eta);
        StateVec wv = StateVec::Zero(N);
        for (int c = 0; c < N; ++c)
          for (int m = 0; m < nb; ++m) wv[c] += w[space.dof(c, dofs[m])] * phi[m];
        const StateVec u = ent.u(wv);
        if (acc.with_residual())
          for (int c = 0; c < N; ++c)
            for (int m = 0; m < nb; ++m)
              acc.add_residual(space.dof(c, dofs[m]), ep.weight * phi[m] * u[c]);
        if (with_jac) {
          const StateMat ju = ent.jac_u_from_value(u);
          for (int c = 0; c < N; ++c)
            for (int m = 0; m < nb; ++m)
              for (int j = 0; j < N; ++j)
                for (int k = 0; k < nb; ++k)
                  acc.add_jacobian(space.dof(c, dofs[m]), space.dof(j, dofs[k]),
                                   ep.weight * phi[m] * ju(c, j) * phi[k]);
        }
      }
    } else if (facet.tag == FacetTag::InitialTime) {
      if (!acc.with_residual()) continue;
      for (const EdgePoint& ep : pts) {
        const Vector& phi = basis_at(e, ep.xi, ep.eta);
        const StateVec rho0 = ctx.rho0(ep.x);
        for (int c = 0; c < N; ++c)
          for (int m = 0; m < nb; ++m)
            acc.add_residual(space.dof(c, dofs[m]), -ep.weight * phi[m] * rho0[c]);
      }
    } else {
      const bool is_left = facet.tag == FacetTag::SpatialLeft;
      const double nu_x = is_left ? -1.0 : 1.0;
      const bool dirichlet = ctx.config.dirichlet &&
                             (is_left ? ctx.config.dirichlet->left : ctx.config.dirichlet->right);
      if (dirichlet) {
        const double eta_pen = ctx.config.dirichlet->eta / spatial_width(mesh, e);
        for (const EdgePoint& ep : pts) {
          const Vector& phi = basis_at(e, ep.xi, ep.eta);
          // gradients of the basis at the edge point
          std::vector<double> dxp(nb);
          {
            const Eigen::Matrix2d J = mesh.jacobian(e, ep.xi, ep.eta);
            const Eigen::Matrix2d Jinv = J.inverse();
            for (int m = 0; m < nb; ++m)
              dxp[m] = Jinv(0, 0) * bg(m, 0) + Jinv(1, 0) * bg(m, 1);
          }
          StateVec wv = StateVec::Zero(N), dxw = StateVec::Zero(N);
          for (int c = 0; c < N; ++c)
            for (int m = 0; m < nb; ++m) {
              const double a = w[space.dof(c, dofs[m])];
              wv[c] += a * phi[m];
              dxw[c] += a * dxp[m];
            }
          compute_point_state(sys, wv, with_jac, ps);
          const StateVec rhoD = ctx.config.dirichlet->data(ep.x, ep.t);
          const StateVec flux = -(ps.B * dxw);  // discrete current
          if (acc.with_residual())
            for (int c = 0; c < N; ++c)
              for (int m = 0; m < nb; ++m)
                acc.add_residual(space.dof(c, dofs[m]),
                                 ep.weight * phi[m] *
                                     (flux[c] * nu_x + eta_pen * (ps.u[c] - rhoD[c])));
          if (with_jac) {
            StateMat dB_dxw(N, N);
            for (int j = 0; j < N; ++j) dB_dxw.col(j) = ps.dB[j] * dxw;
            for (int c = 0; c < N; ++c)
              for (int m = 0; m < nb; ++m)
                for (int j = 0; j < N; ++j)
                  for (int k = 0; k < nb; ++k) {
                    const double dflux =
                        -(dB_dxw(c, j) * phi[k] + ps.B(c, j) * dxp[k]);
                    acc.add_jacobian(
                        space.dof(c, dofs[m]), space.dof(j, dofs[k]),
                        ep.weight * phi[m] *
                            (dflux * nu_x + eta_pen * ps.jac_u(c, j) * phi[k]));
                  }
          }
        }
      } else if (ctx.neumann_present() && acc.with_residual()) {
        for (const EdgePoint& ep : pts) {
          const Vector& phi = basis_at(e, ep.xi, ep.eta);
          const StateVec g = ctx.config.neumann_flux(ep.x, ep.t);
          for (int c = 0; c < N; ++c)
            for (int m = 0; m < nb; ++m)
              acc.add_residual(space.dof(c, dofs[m]), -ep.weight * phi[m] * g[c]);
        }
      }
    }
  }
}

}  // namespace

void assemble_primal(const ResidualContext& ctx, const Vector& w, Vector* residual,
                     SparseMatrix* jacobian) {
  std::vector<Eigen::Triplet<double>> triplets;
  Vector dummy;
  Accumulator acc(ctx.w_dofs(), residual ? residual : &dummy, jacobian ? &triplets : nullptr);
  if (!residual) dummy.setZero(ctx.w_dofs());
  assemble_primal_impl(ctx, w, acc);
  if (jacobian) {
    jacobian->resize(ctx.w_dofs(), ctx.w_dofs());
    jacobian->setFromTriplets(triplets.begin(), triplets.end());
  }
}

Vector residual_primal(const ResidualContext& ctx, const Vector& w) {
  Vector r;
  assemble_primal(ctx, w, &r, nullptr);
  return r;
}

SparseMatrix jacobian_primal(const ResidualContext& ctx, const Vector& w) {
  SparseMatrix j;
  assemble_primal(ctx, w, nullptr, &j);
  return j;
}

namespace {

void assemble_mixed_impl(const ResidualContext& ctx, const Vector& wj, Accumulator& acc) {
  const FeSpace& wspace = *ctx.space;
  const FeSpace& jspace = *ctx.current_space;
  const SpaceTimeMesh& mesh = *wspace.mesh;
  const CrossDiffusionSystem& sys = *ctx.system;
  const EntropyDensity& ent = sys.entropy;
  const int N = sys.components;
  const int degree = ctx.volume_quadrature_degree();
  const double eps = ctx.config.epsilon;
  const bool with_jac = acc.with_jacobian();
  const int joffset = wspace.total_dofs();

  MixedPointState ms;

  for (int e = 0; e < mesh.num_elements(); ++e) {
    const ElementKind kind = mesh.elements[e].kind;
    const QuadratureRule& rule = quadrature(kind, degree);
    const BasisTable& ptab = basis_table(kind, wspace.order, degree);
    const BasisTable& qtab = basis_table(kind, jspace.order, degree);
    const auto& pdofs = wspace.element_dofs[e];
    const auto& qdofs = jspace.element_dofs[e];
    const int npb = static_cast<int>(pdofs.size());
    const int nqb = static_cast<int>(qdofs.size());
    std::vector<double> dxp(npb), dtp(npb);

    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::Matrix2d J = mesh.jacobian(e, rule.points(q, 0), rule.points(q, 1));
      const Eigen::Matrix2d Jinv = J.inverse();
      const double wq = rule.weights[q] * J.determinant();
      for (int m = 0; m < npb; ++m) {
        dxp[m] = Jinv(0, 0) * ptab.dxi(q, m) + Jinv(1, 0) * ptab.deta(q, m);
        dtp[m] = Jinv(0, 1) * ptab.dxi(q, m) + Jinv(1, 1) * ptab.deta(q, m);
      }
      StateVec wv = StateVec::Zero(N), dxw = StateVec::Zero(N), dtw = StateVec::Zero(N);
      for (int c = 0; c < N; ++c)
        for (int m = 0; m < npb; ++m) {
          const double a = wj[wspace.dof(c, pdofs[m])];
          wv[c] += a * ptab.val(q, m);
          dxw[c] += a * dxp[m];
          dtw[c] += a * dtp[m];
        }
      StateVec Jf = StateVec::Zero(N);
      for (int c = 0; c < N; ++c)
        for (int m = 0; m < nqb; ++m)
          Jf[c] += wj[joffset + jspace.dof(c, qdofs[m])] * qtab.val(q, m);
      check_finite(wv.sum() + Jf.sum(), e);

      const StateVec u = ent.u(wv);
      compute_mixed_state(sys, wv, with_jac, ms);
      const StateVec GJ = ms.G * Jf;

      if (acc.with_residual()) {
        for (int c = 0; c < N; ++c) {
          for (int m = 0; m < npb; ++m) {
            double r = -dtp[m] * u[c] - dxp[m] * Jf[c];
            if (eps > 0.0)
              r += eps * (ptab.val(q, m) * wv[c] + dxp[m] * dxw[c] + eps * dtp[m] * dtw[c]);
            acc.add_residual(wspace.dof(c, pdofs[m]), wq * r);
          }
          for (int m = 0; m < nqb; ++m)
            acc.add_residual(joffset + jspace.dof(c, qdofs[m]),
                             -wq * qtab.val(q, m) * (dxw[c] - GJ[c]));
        }
      }
      if (with_jac) {
        const StateMat ju = ent.jac_u_from_value(u);
        StateMat dG_J(N, N);  // column j: sum_n dG[j](c,n) J_n
        for (int j = 0; j < N; ++j) dG_J.col(j) = ms.dG[j] * Jf;
        for (int c = 0; c < N; ++c) {
          for (int m = 0; m < npb; ++m) {
            const int row = wspace.dof(c, pdofs[m]);
            for (int j = 0; j < N; ++j) {
              for (int k = 0; k < npb; ++k) {
                double v = -dtp[m] * ju(c, j) * ptab.val(q, k);
                if (eps > 0.0 && j == c)
                  v += eps * (ptab.val(q, m) * ptab.val(q, k) + dxp[m] * dxp[k] +
                              eps * dtp[m] * dtp[k]);
                acc.add_jacobian(row, wspace.dof(j, pdofs[k]), wq * v);
              }
              if (j == c)
                for (int k = 0; k < nqb; ++k)
                  acc.add_jacobian(row, joffset + jspace.dof(j, qdofs[k]),
                                   -wq * dxp[m] * qtab.val(q, k));
            }
          }
          for (int m = 0; m < nqb; ++m) {
            const int row = joffset + jspace.dof(c, qdofs[m]);
            for (int j = 0; j < N; ++j) {
              for (int k = 0; k < npb; ++k) {
                double v = 0.0;
                if (j == c) v -= dxp[k];
                v += dG_J(c, j) * ptab.val(q, k);
                acc.add_jacobian(row, wspace.dof(j, pdofs[k]), wq * qtab.val(q, m) * v);
              }
              for (int k = 0; k < nqb; ++k)
                acc.add_jacobian(row, joffset + jspace.dof(j, qdofs[k]),
                                 wq * qtab.val(q, m) * ms.G(c, j) * qtab.val(q, k));
            }
          }
        }
      }
    }
  }

  // Boundary terms.
  const int edge_degree = 2 * std::max(wspace.order, jspace.order) + 2;
  Vector pv, qv;
  Eigen::Matrix<double, Eigen::Dynamic, 2> pg, qg;

  for (const BoundaryFacet& facet : mesh.facets) {
    const int e = facet.element;
    const auto& pdofs = wspace.element_dofs[e];
    const auto& qdofs = jspace.element_dofs[e];
    const int npb = static_cast<int>(pdofs.size());
    const int nqb = static_cast<int>(qdofs.size());
    const auto pts = edge_points(mesh, e, facet.local_edge, edge_degree);
    const ReferenceBasis& prb = wspace.basis(e);
    const ReferenceBasis& qrb = jspace.basis(e);

    if (facet.tag == FacetTag::FinalTime || facet.tag == FacetTag::InitialTime) {
      for (const EdgePoint& ep : pts) {
        prb.eval(ep.xi, ep.eta, pv, pg);
        if (facet.tag == FacetTag::InitialTime) {
          if (!acc.with_residual()) continue;
          const StateVec rho0 = ctx.rho0(ep.x);
          for (int c = 0; c < N; ++c)
            for (int m = 0; m < npb; ++m)
              acc.add_residual(wspace.dof(c, pdofs[m]), -ep.weight * pv[m] * rho0[c]);
          continue;
        }
        StateVec wv = StateVec::Zero(N);
        for (int c = 0; c < N; ++c)
          for (int m = 0; m < npb; ++m) wv[c] += wj[wspace.dof(c, pdofs[m])] * pv[m];
        const StateVec u = ent.u(wv);
        if (acc.with_residual())
          for (int c = 0; c < N; ++c)
            for (int m = 0; m < npb; ++m)
              acc.add_residual(wspace.dof(c, pdofs[m]), ep.weight * pv[m] * u[c]);
        if (with_jac) {
          const StateMat ju = ent.jac_u_from_value(u);
          for (int c = 0; c < N; ++c)
            for (int m = 0; m < npb; ++m)
              for (int j = 0; j < N; ++j)
                for (int k = 0; k < npb; ++k)
                  acc.add_jacobian(wspace.dof(c, pdofs[m]), wspace.dof(j, pdofs[k]),
                                   ep.weight * pv[m] * ju(c, j) * pv[k]);
        }
      }
    } else {
      const bool is_left = facet.tag == FacetTag::SpatialLeft;
      const double nu_x = is_left ? -1.0 : 1.0;
      const bool dirichlet = ctx.config.dirichlet &&
                             (is_left ? ctx.config.dirichlet->left : ctx.config.dirichlet->right);
      if (!dirichlet) continue;  // homogeneous flux is natural in the mixed form
      const double eta_pen = ctx.config.dirichlet->eta / spatial_width(mesh, e);
      for (const EdgePoint& ep : pts) {
        prb.eval(ep.xi, ep.eta, pv, pg);
        qrb.eval(ep.xi, ep.eta, qv, qg);
        StateVec wv = StateVec::Zero(N);
        for (int c = 0; c < N; ++c)
          for (int m = 0; m < npb; ++m) wv[c] += wj[wspace.dof(c, pdofs[m])] * pv[m];
        StateVec Jf = StateVec::Zero(N);
        for (int c = 0; c < N; ++c)
          for (int m = 0; m < nqb; ++m) Jf[c] += wj[joffset + jspace.dof(c, qdofs[m])] * qv[m];
        const StateVec u = ent.u(wv);
        const StateVec rhoD = ctx.config.dirichlet->data(ep.x, ep.t);
        if (acc.with_residual()) {
          for (int c = 0; c < N; ++c) {
            for (int m = 0; m < npb; ++m)
              acc.add_residual(wspace.dof(c, pdofs[m]),
                               ep.weight * pv[m] *
                                   (Jf[c] * nu_x + eta_pen * (u[c] - rhoD[c])));
            for (int m = 0; m < nqb; ++m)
              acc.add_residual(joffset + jspace.dof(c, qdofs[m]),
                               ep.weight * qv[m] * (u[c] - rhoD[c]) * nu_x);
          }
        }
        if (with_jac) {
          const StateMat ju = ent.jac_u_from_value(u);
          for (int c = 0; c < N; ++c) {
            for (int m = 0; m < npb; ++m) {
              const int row = wspace.dof(c, pdofs[m]);
              for (int k = 0; k < nqb; ++k)
                acc.add_jacobian(row, joffset + jspace.dof(c, qdofs[k]),
                                 ep.weight * pv[m] * qv[k] * nu_x);
              for (int j = 0; j < N; ++j)
                for (int k = 0; k < npb; ++k)
                  acc.add_jacobian(row, wspace.dof(j, pdofs[k]),
                                   ep.weight * pv[m] * eta_pen * ju(c, j) * pv[k]);
            }
            for (int m = 0; m < nqb; ++m) {
              const int row = joffset + jspace.dof(c, qdofs[m]);
              for (int j = 0; j < N; ++j)
                for (int k = 0; k < npb; ++k)
                  acc.add_jacobian(row, wspace.dof(j, pdofs[k]),
                                   ep.weight * qv[m] * nu_x * ju(c, j) * pv[k]);
            }
          }
        }
      }
    }
  }
}

}  // namespace

void assemble_mixed(const ResidualContext& ctx, const Vector& wj, Vector* residual,
                    SparseMatrix* jacobian) {
  if (!ctx.current_space) throw std::invalid_argument("mixed formulation requires a current space");
  std::vector<Eigen::Triplet<double>> triplets;
  Vector dummy;
  Accumulator acc(ctx.total_dofs(), residual ? residual : &dummy,
                  jacobian ? &triplets : nullptr);
  if (!residual) dummy.setZero(ctx.total_dofs());
  assemble_mixed_impl(ctx, wj, acc);
  if (jacobian) {
    jacobian->resize(ctx.total_dofs(), ctx.total_dofs());
    jacobian->setFromTriplets(triplets.begin(), triplets.end());
  }
}

Vector residual_mixed(const ResidualContext& ctx, const Vector& wj) {
  Vector r;
  assemble_mixed(ctx, wj, &r, nullptr);
  return r;
}

SparseMatrix jacobian_mixed(const ResidualContext& ctx, const Vector& wj) {
  SparseMatrix j;
  assemble_mixed(ctx, wj, nullptr, &j);
  return j;
}

void assemble(const ResidualContext& ctx, const Vector& unknowns, Vector* residual,
              SparseMatrix* jacobian) {
  if (ctx.config.formulation == Formulation::Primal)
    assemble_primal(ctx, unknowns, residual, jacobian);
  else
    assemble_mixed(ctx, unknowns, residual, jacobian);
}

EntropyLedger entropy_ledger(const ResidualContext& ctx, const Vector& unknowns) {
  const FeSpace& space = *ctx.space;
  const SpaceTimeMesh& mesh = *space.mesh;
  const CrossDiffusionSystem& sys = *ctx.system;
  const EntropyDensity& ent = sys.entropy;
  const int N = sys.components;
  const double eps = ctx.config.epsilon;
  const bool mixed = ctx.config.formulation == Formulation::MixedImplicitCurrent;
  const int joffset = space.total_dofs();

  EntropyLedger ledger;
  ledger.applicable = ctx.closed_system();

  const int degree = ctx.volume_quadrature_degree();
  double reg = 0.0, dissipation = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const ElementKind kind = mesh.elements[e].kind;
    const QuadratureRule& rule = quadrature(kind, degree);
    const BasisTable& table = basis_table(kind, space.order, degree);
    const auto& dofs = space.element_dofs[e];
    const int nb = static_cast<int>(dofs.size());
    const BasisTable* qtab = mixed ? &basis_table(kind, ctx.current_space->order, degree) : nullptr;
    const std::vector<int>* qdofs = mixed ? &ctx.current_space->element_dofs[e] : nullptr;

    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::Matrix2d J = mesh.jacobian(e, rule.points(q, 0), rule.points(q, 1));
      const Eigen::Matrix2d Jinv = J.inverse();
      const double wq = rule.weights[q] * J.determinant();
      StateVec wv = StateVec::Zero(N), dxw = StateVec::Zero(N), dtw = StateVec::Zero(N);
      for (int c = 0; c < N; ++c)
        for (int m = 0; m < nb; ++m) {
          const double a = unknowns[space.dof(c, dofs[m])];
          const double dx = Jinv(0, 0) * table.dxi(q, m) + Jinv(1, 0) * table.deta(q, m);
          const double dt = Jinv(0, 1) * table.dxi(q, m) + Jinv(1, 1) * table.deta(q, m);
          wv[c] += a * table.val(q, m);
          dxw[c] += a * dx;
          dtw[c] += a * dt;
        }
      reg += wq * (wv.squaredNorm() + dxw.squaredNorm() + eps * dtw.squaredNorm());
      const StateVec u = ent.u(wv);
      if (!mixed) {
        const StateVec dxu = ent.jac_u_from_value(u) * dxw;
        dissipation += wq * dxu.squaredNorm();
      } else {
        StateVec Jf = StateVec::Zero(N);
        for (int c = 0; c < N; ++c)
          for (size_t m = 0; m < qdofs->size(); ++m)
            Jf[c] += unknowns[joffset + ctx.current_space->dof(c, (*qdofs)[m])] *
                     (*qtab).val(q, static_cast<int>(m));
        const StateVec MJ = sys.mixed_M(u) * Jf;
        dissipation += wq * MJ.squaredNorm();
      }
    }
  }
  ledger.regularization = eps * reg;
  ledger.dissipation = sys.gamma * dissipation;

  const Vector wpart = unknowns.head(space.total_dofs());
  for (const TracePoint& tp : trace_quadrature(space, FacetTag::FinalTime)) {
    const FieldValue fv = evaluate_field(space, wpart, tp.element, tp.xi, tp.eta);
    ledger.final_entropy += tp.weight * ent.s(ent.u(fv.value));
  }
  for (const TracePoint& tp : trace_quadrature(space, FacetTag::InitialTime))
    ledger.initial_entropy += tp.weight * ent.s(ctx.rho0(tp.x));

  ledger.reaction_bound = sys.c_f * (mesh.x_right - mesh.x_left) * mesh.duration();
  ledger.lhs = ledger.regularization + ledger.final_entropy + ledger.dissipation;
  ledger.rhs = ledger.initial_entropy + ledger.reaction_bound;
  return ledger;
}

BoundednessAudit audit_boundedness(const ResidualContext& ctx, const Vector& unknowns) {
  const FeSpace& space = *ctx.space;
  const SpaceTimeMesh& mesh = *space.mesh;
  const EntropyDensity& ent = ctx.system->entropy;
  const int N = ctx.system->components;
  const int degree = ctx.volume_quadrature_degree();

  BoundednessAudit audit;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const ElementKind kind = mesh.elements[e].kind;
    const QuadratureRule& rule = quadrature(kind, degree);
    const BasisTable& table = basis_table(kind, space.order, degree);
    const auto& dofs = space.element_dofs[e];
    for (int q = 0; q < rule.size(); ++q) {
      StateVec wv = StateVec::Zero(N);
      for (int c = 0; c < N; ++c)
        for (size_t m = 0; m < dofs.size(); ++m)
          wv[c] += unknowns[space.dof(c, dofs[m])] * table.val(q, static_cast<int>(m));
      ++audit.total;
      if (!ent.range_contains(ent.u(wv))) ++audit.violations;
    }
  }
  return audit;
}

}  // namespace crossdiff
