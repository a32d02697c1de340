#include "crossdiff/fe_space.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <unordered_map>

namespace crossdiff {

namespace {

double binomial_factor(int p, int i, int j) {
  // p! / (i! j! (p-i-j)!)
  double r = 1.0;
  int k = p - i - j;
  int num = p;
  for (int m = 1; m <= i; ++m) r *= static_cast<double>(num--) / m;
  for (int m = 1; m <= j; ++m) r *= static_cast<double>(num--) / m;
  (void)k;
  return r;
}

// Bernstein polynomials on the unit triangle and their reference gradients.
void bernstein_triangle(int p, double xi, double eta, Vector& b, Eigen::Matrix<double, Eigen::Dynamic, 2>& db) {
  const double l0 = 1.0 - xi - eta;
  const int nb = (p + 1) * (p + 2) / 2;
  b.resize(nb);
  db.resize(nb, 2);
  int idx = 0;
  auto ipow = [](double base, int e) {
    double r = 1.0;
    for (int k = 0; k < e; ++k) r *= base;
    return r;
  };
  for (int i = 0; i <= p; ++i)
    for (int j = 0; j <= p - i; ++j, ++idx) {
      const int k = p - i - j;  // exponent of l0
      const double c = binomial_factor(p, i, j);
      b[idx] = c * ipow(xi, i) * ipow(eta, j) * ipow(l0, k);
      double dxi = 0.0, deta = 0.0;
      if (i > 0) dxi += i * ipow(xi, i - 1) * ipow(eta, j) * ipow(l0, k);
      if (k > 0) dxi -= k * ipow(xi, i) * ipow(eta, j) * ipow(l0, k - 1);
      if (j > 0) deta += j * ipow(xi, i) * ipow(eta, j - 1) * ipow(l0, k);
      if (k > 0) deta -= k * ipow(xi, i) * ipow(eta, j) * ipow(l0, k - 1);
      db(idx, 0) = c * dxi;
      db(idx, 1) = c * deta;
    }
}

void lagrange_1d(int p, double x, Vector& values, Vector& derivs) {
  const int n = p + 1;
  values.resize(n);
  derivs.resize(n);
  Vector s(n);
  for (int k = 0; k <= p; ++k) s[k] = -1.0 + 2.0 * k / p;
  if (p == 0) {
    values[0] = 1.0;
    derivs[0] = 0.0;
    return;
  }
  for (int i = 0; i < n; ++i) {
    double denom = 1.0, num = 1.0;
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      denom *= s[i] - s[k];
      num *= x - s[k];
    }
    values[i] = num / denom;
    double d = 0.0;
    for (int m = 0; m < n; ++m) {
      if (m == i) continue;
      double prod = 1.0;
      for (int k = 0; k < n; ++k) {
        if (k == i || k == m) continue;
        prod *= x - s[k];
      }
      d += prod;
    }
    derivs[i] = d / denom;
  }
}

}  // namespace

ReferenceBasis::ReferenceBasis(ElementKind k, int p) : kind(k), order(p) {
  if (p < 1 || p > 6) throw std::invalid_argument("unsupported polynomial order (need 1 <= p <= 6)");
  if (kind == ElementKind::Triangle) {
    size = (p + 1) * (p + 2) / 2;
    nodes.resize(size, 2);
    keys.resize(size);
    int idx = 0;
    auto put = [&](double xi, double eta, NodeKey key) {
      nodes(idx, 0) = xi;
      nodes(idx, 1) = eta;
      keys[idx] = key;
      ++idx;
    };
    put(0.0, 0.0, {NodeKey::Vertex, 0, 0});
    put(1.0, 0.0, {NodeKey::Vertex, 1, 0});
    put(0.0, 1.0, {NodeKey::Vertex, 2, 0});
    for (int m = 1; m < p; ++m) put(static_cast<double>(m) / p, 0.0, {NodeKey::Edge, 0, m - 1});
    for (int m = 1; m < p; ++m)
      put(1.0 - static_cast<double>(m) / p, static_cast<double>(m) / p, {NodeKey::Edge, 1, m - 1});
    for (int m = 1; m < p; ++m) put(0.0, 1.0 - static_cast<double>(m) / p, {NodeKey::Edge, 2, m - 1});
    int interior = 0;
    for (int i = 1; i < p; ++i)
      for (int j = 1; j + i <= p - 1; ++j) put(static_cast<double>(i) / p, static_cast<double>(j) / p, {NodeKey::Interior, 0, interior++});

    // Lagrange basis through the Bernstein basis: solve V C = I with
    // V_{mn} = B_n(node_m). Keeps the Vandermonde well conditioned up to p=6.
    Eigen::MatrixXd V(size, size);
    Vector b;
    Eigen::Matrix<double, Eigen::Dynamic, 2> db;
    for (int m = 0; m < size; ++m) {
      bernstein_triangle(p, nodes(m, 0), nodes(m, 1), b, db);
      V.row(m) = b.transpose();
    }
    coeffs_ = V.fullPivLu().solve(Eigen::MatrixXd::Identity(size, size));
  } else {
    size = (p + 1) * (p + 1);
    nodes.resize(size, 2);
    keys.resize(size);
    auto coord = [p](int k) { return -1.0 + 2.0 * static_cast<double>(k) / p; };
    std::vector<std::pair<int, int>> grid(size);
    int idx = 0;
    auto put = [&](int i, int j, NodeKey key) {
      nodes(idx, 0) = coord(i);
      nodes(idx, 1) = coord(j);
      grid[idx] = {i, j};
      keys[idx] = key;
      ++idx;
    };
    put(0, 0, {NodeKey::Vertex, 0, 0});
    put(p, 0, {NodeKey::Vertex, 1, 0});
    put(p, p, {NodeKey::Vertex, 2, 0});
    put(0, p, {NodeKey::Vertex, 3, 0});
    for (int m = 1; m < p; ++m) put(m, 0, {NodeKey::Edge, 0, m - 1});
    for (int m = 1; m < p; ++m) put(p, m, {NodeKey::Edge, 1, m - 1});
    for (int m = 1; m < p; ++m) put(p - m, p, {NodeKey::Edge, 2, m - 1});
    for (int m = 1; m < p; ++m) put(0, p - m, {NodeKey::Edge, 3, m - 1});
    int interior = 0;
    for (int i = 1; i < p; ++i)
      for (int j = 1; j < p; ++j) put(i, j, {NodeKey::Interior, 0, interior++});
    grid_ = std::move(grid);
  }
}

void ReferenceBasis::eval(double xi, double eta, Vector& values,
                          Eigen::Matrix<double, Eigen::Dynamic, 2>& grads) const {
  if (kind == ElementKind::Triangle) {
    Vector b;
    Eigen::Matrix<double, Eigen::Dynamic, 2> db;
    bernstein_triangle(order, xi, eta, b, db);
    values = coeffs_.transpose() * b;
    grads = coeffs_.transpose() * db;
  } else {
    Vector lx, dlx, lt, dlt;
    lagrange_1d(order, xi, lx, dlx);
    lagrange_1d(order, eta, lt, dlt);
    values.resize(size);
    grads.resize(size, 2);
    for (int m = 0; m < size; ++m) {
      const auto [i, j] = grid_[m];
      values[m] = lx[i] * lt[j];
      grads(m, 0) = dlx[i] * lt[j];
      grads(m, 1) = lx[i] * dlt[j];
    }
  }
}

const ReferenceBasis& reference_basis(ElementKind kind, int order) {
  static std::map<std::pair<int, int>, ReferenceBasis> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  const auto key = std::make_pair(static_cast<int>(kind), order);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, ReferenceBasis(kind, order)).first;
  return it->second;
}

FeSpace build_space(const SpaceTimeMesh& mesh, int order, int components) {
  if (order < 1 || order > 6) throw std::invalid_argument("unsupported polynomial order (need 1 <= p <= 6)");
  if (components < 1) throw std::invalid_argument("components must be >= 1");
  FeSpace space;
  space.mesh = &mesh;
  space.order = order;
  space.components = components;

  // Scalar dof numbering: mesh vertices, then edges by sorted endpoint ids,
  // then element interiors by element id.
  std::map<std::pair<int, int>, int> edge_index;
  for (int e = 0; e < mesh.num_elements(); ++e)
    for (int k = 0; k < mesh.elements[e].nedges(); ++k) {
      auto [a, b] = mesh.edge_vertices(e, k);
      edge_index.emplace(std::minmax(a, b), 0);
    }
  int next = mesh.num_nodes();
  const int per_edge = order - 1;
  for (auto& [key, base] : edge_index) {
    base = next;
    next += per_edge;
  }

  space.element_dofs.resize(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const ReferenceBasis& rb = reference_basis(mesh.elements[e].kind, order);
    auto& dofs = space.element_dofs[e];
    dofs.resize(rb.size);
    int interior_base = -1;
    for (int m = 0; m < rb.size; ++m) {
      const auto& key = rb.keys[m];
      switch (key.type) {
        case ReferenceBasis::NodeKey::Vertex:
          dofs[m] = mesh.elements[e].v[key.entity];
          break;
        case ReferenceBasis::NodeKey::Edge: {
          auto [a, b] = mesh.edge_vertices(e, key.entity);
          const int base = edge_index.at(std::minmax(a, b));
          const int pos = (a < b) ? key.position : (per_edge - 1 - key.position);
          dofs[m] = base + pos;
          break;
        }
        case ReferenceBasis::NodeKey::Interior:
          if (interior_base < 0) {
            interior_base = next;
            const int count = static_cast<int>(std::count_if(
                rb.keys.begin(), rb.keys.end(), [](const ReferenceBasis::NodeKey& k) {
                  return k.type == ReferenceBasis::NodeKey::Interior;
                }));
            next += count;
          }
          dofs[m] = interior_base + key.position;
          break;
      }
    }
  }
  space.scalar_dofs = next;
  return space;
}

Vector interpolate(const FeSpace& space, const SpaceTimeFn& g) {
  Vector coeffs = Vector::Zero(space.total_dofs());
  const SpaceTimeMesh& mesh = *space.mesh;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const ReferenceBasis& rb = space.basis(e);
    for (int m = 0; m < rb.size; ++m) {
      const Node p = mesh.map_to_physical(e, rb.nodes(m, 0), rb.nodes(m, 1));
      const StateVec v = g(p.x, p.t);
      for (int c = 0; c < space.components; ++c) {
        if (!std::isfinite(v[c])) throw NumericError("non-finite nodal value in interpolate", e);
        coeffs[space.dof(c, space.element_dofs[e][m])] = v[c];
      }
    }
  }
  return coeffs;
}

FieldValue evaluate_field(const FeSpace& space, const Vector& coeffs, int element, double xi,
                          double eta) {
  const ReferenceBasis& rb = space.basis(element);
  Vector values;
  Eigen::Matrix<double, Eigen::Dynamic, 2> grads;
  rb.eval(xi, eta, values, grads);
  const Eigen::Matrix2d J = space.mesh->jacobian(element, xi, eta);
  const Eigen::Matrix2d Jinv = J.inverse();

  FieldValue out;
  out.value = StateVec::Zero(space.components);
  out.dx = StateVec::Zero(space.components);
  out.dt = StateVec::Zero(space.components);
  for (int c = 0; c < space.components; ++c) {
    double v = 0.0, gxi = 0.0, geta = 0.0;
    for (int m = 0; m < rb.size; ++m) {
      const double a = coeffs[space.dof(c, space.element_dofs[element][m])];
      v += a * values[m];
      gxi += a * grads(m, 0);
      geta += a * grads(m, 1);
    }
    out.value[c] = v;
    // d/dx = dxi/dx d/dxi + deta/dx d/deta ; rows of Jinv are (dxi,deta)/d(x,t)
    out.dx[c] = Jinv(0, 0) * gxi + Jinv(1, 0) * geta;
    out.dt[c] = Jinv(0, 1) * gxi + Jinv(1, 1) * geta;
  }
  return out;
}

std::vector<TracePoint> trace_quadrature(const FeSpace& space, FacetTag tag) {
  if (tag != FacetTag::InitialTime && tag != FacetTag::FinalTime)
    throw std::invalid_argument("trace quadrature supports time facets only");
  const SpaceTimeMesh& mesh = *space.mesh;
  const double t_value = (tag == FacetTag::InitialTime) ? mesh.t_initial : mesh.t_final;
  Vector gn, gw;
  gauss_for_degree(2 * space.order + 2, gn, gw);

  std::vector<TracePoint> points;
  for (const BoundaryFacet& f : mesh.facets) {
    if (f.tag != tag) continue;
    const Element& el = mesh.elements[f.element];
    auto [a, b] = mesh.edge_vertices(f.element, f.local_edge);
    auto vertex_ref = [&](int lv) -> Eigen::Vector2d {
      if (el.kind == ElementKind::Triangle) {
        static const double refs[3][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
        return {refs[lv][0], refs[lv][1]};
      }
      static const double refs[4][2] = {{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}};
      return {refs[lv][0], refs[lv][1]};
    };
    const Eigen::Vector2d ra = vertex_ref(f.local_edge);
    const Eigen::Vector2d rbv = vertex_ref((f.local_edge + 1) % el.nvert());
    const double len = std::hypot(mesh.nodes[b].x - mesh.nodes[a].x, mesh.nodes[b].t - mesh.nodes[a].t);
    for (int q = 0; q < gn.size(); ++q) {
      const double s0 = 0.5 * (1.0 - gn[q]);
      const double s1 = 0.5 * (1.0 + gn[q]);
      TracePoint tp;
      tp.element = f.element;
      tp.xi = s0 * ra[0] + s1 * rbv[0];
      tp.eta = s0 * ra[1] + s1 * rbv[1];
      tp.weight = 0.5 * len * gw[q];
      tp.x = s0 * mesh.nodes[a].x + s1 * mesh.nodes[b].x;
      tp.t = t_value;
      points.push_back(tp);
    }
  }
  return points;
}

double l2_error(const FeSpace& space, const Vector& coeffs, const PointwiseMap& transform,
                const SpaceTimeFn& exact) {
  const SpaceTimeMesh& mesh = *space.mesh;
  double acc = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const QuadratureRule& rule = quadrature(mesh.elements[e].kind, 2 * space.order + 2);
    for (int q = 0; q < rule.size(); ++q) {
      const double xi = rule.points(q, 0), eta = rule.points(q, 1);
      const FieldValue fv = evaluate_field(space, coeffs, e, xi, eta);
      const Node p = mesh.map_to_physical(e, xi, eta);
      const double det = mesh.jacobian(e, xi, eta).determinant();
      const StateVec diff = transform(fv.value) - exact(p.x, p.t);
      acc += rule.weights[q] * det * diff.squaredNorm();
    }
  }
  return std::sqrt(acc);
}

double time_slice_integral(const FeSpace& space, const Vector& coeffs, double t0,
                           const std::function<double(const StateVec&)>& integrand, double x_lo,
                           double x_hi) {
  return time_slice_integral_x(
      space, coeffs, t0, [&](double, const StateVec& w) { return integrand(w); }, x_lo, x_hi);
}

double time_slice_integral_x(const FeSpace& space, const Vector& coeffs, double t0,
                             const std::function<double(double, const StateVec&)>& integrand,
                             double x_lo, double x_hi) {
  const SpaceTimeMesh& mesh = *space.mesh;
  const double scale = std::max({1.0, mesh.t_final, mesh.x_right - mesh.x_left});
  const double teps = 1e-12 * scale;
  const bool top = t0 >= mesh.t_final - teps;
  Vector gn, gw;
  gauss_for_degree(2 * space.order + 2, gn, gw);

  double acc = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    double tmin = 1e300, tmax = -1e300;
    for (int k = 0; k < el.nvert(); ++k) {
      tmin = std::min(tmin, mesh.nodes[el.v[k]].t);
      tmax = std::max(tmax, mesh.nodes[el.v[k]].t);
    }
    if (t0 < tmin - teps || t0 > tmax + teps) continue;
    // Half-open convention in t avoids double counting on shared mesh lines.
    if (!top && t0 >= tmax - teps) continue;
    if (top && tmax < mesh.t_final - teps) continue;

    double xa = 1e300, xb = -1e300;
    for (int k = 0; k < el.nvert(); ++k) {
      const Node& na = mesh.nodes[el.v[k]];
      const Node& nb = mesh.nodes[el.v[(k + 1) % el.nvert()]];
      if (std::abs(na.t - t0) <= teps) {
        xa = std::min(xa, na.x);
        xb = std::max(xb, na.x);
      }
      if ((na.t - t0) * (nb.t - t0) < 0.0) {
        const double s = (t0 - na.t) / (nb.t - na.t);
        const double x = na.x + s * (nb.x - na.x);
        xa = std::min(xa, x);
        xb = std::max(xb, x);
      }
    }
    xa = std::max(xa, x_lo);
    xb = std::min(xb, x_hi);
    if (xb - xa <= teps) continue;

    for (int q = 0; q < gn.size(); ++q) {
      const double x = 0.5 * (xa + xb) + 0.5 * (xb - xa) * gn[q];
      const Eigen::Vector2d ref = mesh.reference_coordinates(e, x, t0);
      const FieldValue fv = evaluate_field(space, coeffs, e, ref[0], ref[1]);
      acc += 0.5 * (xb - xa) * gw[q] * integrand(x, fv.value);
    }
  }
  return acc;
}

}  // namespace crossdiff
