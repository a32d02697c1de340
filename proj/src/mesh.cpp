#include "crossdiff/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_map>

namespace crossdiff {

namespace {

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

inline double dist(const Node& a, const Node& b) {
  return std::hypot(a.x - b.x, a.t - b.t);
}

double tri_signed_area(const Node& a, const Node& b, const Node& c) {
  return 0.5 * ((b.x - a.x) * (c.t - a.t) - (c.x - a.x) * (b.t - a.t));
}

// Triangle with the bisection edge placed at (v0,v1). For initial meshes the
// bisection edge is the longest edge (ties broken by smallest sorted vertex
// pair); counterclockwise orientation is restored by swapping v0,v1.
Element make_triangle_longest_edge(int a, int b, int c, const std::vector<Node>& nodes) {
  const std::array<std::pair<int, int>, 3> edges{{{a, b}, {b, c}, {c, a}}};
  const std::array<int, 3> opposite{c, a, b};
  int best = 0;
  double best_len = -1.0;
  for (int k = 0; k < 3; ++k) {
    const double len = dist(nodes[edges[k].first], nodes[edges[k].second]);
    if (len > best_len + 1e-14 * (len + best_len)) {
      best = k;
      best_len = len;
    } else if (std::abs(len - best_len) <= 1e-14 * (len + best_len)) {
      auto key = [&](int e) {
        return std::minmax(edges[e].first, edges[e].second);
      };
      if (key(k) < key(best)) best = k;
    }
  }
  Element el;
  el.kind = ElementKind::Triangle;
  el.v = {edges[best].first, edges[best].second, opposite[best], -1};
  if (tri_signed_area(nodes[el.v[0]], nodes[el.v[1]], nodes[el.v[2]]) < 0.0)
    std::swap(el.v[0], el.v[1]);
  return el;
}

// Bisection child: explicit edge (a,b) opposite the newest vertex peak.
Element make_triangle_child(int a, int b, int peak, const std::vector<Node>& nodes) {
  Element el;
  el.kind = ElementKind::Triangle;
  el.v = {a, b, peak, -1};
  if (tri_signed_area(nodes[a], nodes[b], nodes[peak]) < 0.0) std::swap(el.v[0], el.v[1]);
  return el;
}

}  // namespace

std::pair<int, int> SpaceTimeMesh::edge_vertices(int element, int local_edge) const {
  const Element& el = elements[element];
  const int n = el.nvert();
  return {el.v[local_edge], el.v[(local_edge + 1) % n]};
}

double SpaceTimeMesh::edge_length(int element, int local_edge) const {
  auto [a, b] = edge_vertices(element, local_edge);
  return dist(nodes[a], nodes[b]);
}

double SpaceTimeMesh::element_diameter(int element) const {
  const Element& el = elements[element];
  if (el.kind == ElementKind::Triangle) {
    double d = 0.0;
    for (int k = 0; k < 3; ++k) d = std::max(d, edge_length(element, k));
    return d;
  }
  return std::max(dist(nodes[el.v[0]], nodes[el.v[2]]), dist(nodes[el.v[1]], nodes[el.v[3]]));
}

double SpaceTimeMesh::signed_area(int element) const {
  const Element& el = elements[element];
  if (el.kind == ElementKind::Triangle)
    return tri_signed_area(nodes[el.v[0]], nodes[el.v[1]], nodes[el.v[2]]);
  return tri_signed_area(nodes[el.v[0]], nodes[el.v[1]], nodes[el.v[2]]) +
         tri_signed_area(nodes[el.v[0]], nodes[el.v[2]], nodes[el.v[3]]);
}

Node SpaceTimeMesh::map_to_physical(int element, double xi, double eta) const {
  const Element& el = elements[element];
  if (el.kind == ElementKind::Triangle) {
    const Node& a = nodes[el.v[0]];
    const Node& b = nodes[el.v[1]];
    const Node& c = nodes[el.v[2]];
    const double l0 = 1.0 - xi - eta;
    return {l0 * a.x + xi * b.x + eta * c.x, l0 * a.t + xi * b.t + eta * c.t};
  }
  const Node& a = nodes[el.v[0]];
  const Node& b = nodes[el.v[1]];
  const Node& c = nodes[el.v[2]];
  const Node& d = nodes[el.v[3]];
  const double s0 = 0.25 * (1.0 - xi) * (1.0 - eta);
  const double s1 = 0.25 * (1.0 + xi) * (1.0 - eta);
  const double s2 = 0.25 * (1.0 + xi) * (1.0 + eta);
  const double s3 = 0.25 * (1.0 - xi) * (1.0 + eta);
  return {s0 * a.x + s1 * b.x + s2 * c.x + s3 * d.x, s0 * a.t + s1 * b.t + s2 * c.t + s3 * d.t};
}

Eigen::Matrix2d SpaceTimeMesh::jacobian(int element, double xi, double eta) const {
  const Element& el = elements[element];
  Eigen::Matrix2d J;
  if (el.kind == ElementKind::Triangle) {
    const Node& a = nodes[el.v[0]];
    const Node& b = nodes[el.v[1]];
    const Node& c = nodes[el.v[2]];
    J << b.x - a.x, c.x - a.x, b.t - a.t, c.t - a.t;
    return J;
  }
  const Node& a = nodes[el.v[0]];
  const Node& b = nodes[el.v[1]];
  const Node& c = nodes[el.v[2]];
  const Node& d = nodes[el.v[3]];
  const double dx_dxi = 0.25 * ((1.0 - eta) * (b.x - a.x) + (1.0 + eta) * (c.x - d.x));
  const double dx_deta = 0.25 * ((1.0 - xi) * (d.x - a.x) + (1.0 + xi) * (c.x - b.x));
  const double dt_dxi = 0.25 * ((1.0 - eta) * (b.t - a.t) + (1.0 + eta) * (c.t - d.t));
  const double dt_deta = 0.25 * ((1.0 - xi) * (d.t - a.t) + (1.0 + xi) * (c.t - b.t));
  J << dx_dxi, dx_deta, dt_dxi, dt_deta;
  return J;
}

Eigen::Vector2d SpaceTimeMesh::reference_coordinates(int element, double x, double t) const {
  const Element& el = elements[element];
  if (el.kind == ElementKind::Triangle) {
    const Node& a = nodes[el.v[0]];
    const Node& b = nodes[el.v[1]];
    const Node& c = nodes[el.v[2]];
    const double det = (b.x - a.x) * (c.t - a.t) - (c.x - a.x) * (b.t - a.t);
    const double xi = ((x - a.x) * (c.t - a.t) - (c.x - a.x) * (t - a.t)) / det;
    const double eta = ((b.x - a.x) * (t - a.t) - (x - a.x) * (b.t - a.t)) / det;
    return {xi, eta};
  }
  const Node& a = nodes[el.v[0]];
  const Node& c = nodes[el.v[2]];
  return {2.0 * (x - a.x) / (c.x - a.x) - 1.0, 2.0 * (t - a.t) / (c.t - a.t) - 1.0};
}

void SpaceTimeMesh::finalize() {
  h = 0.0;
  for (int e = 0; e < num_elements(); ++e) h = std::max(h, element_diameter(e));

  std::unordered_map<std::uint64_t, int> edge_count;
  edge_count.reserve(elements.size() * 4);
  for (int e = 0; e < num_elements(); ++e)
    for (int k = 0; k < elements[e].nedges(); ++k) {
      auto [a, b] = edge_vertices(e, k);
      ++edge_count[edge_key(a, b)];
    }

  facets.clear();
  for (int e = 0; e < num_elements(); ++e) {
    if (signed_area(e) <= 0.0) throw std::logic_error("element with nonpositive area");
    for (int k = 0; k < elements[e].nedges(); ++k) {
      auto [a, b] = edge_vertices(e, k);
      const int count = edge_count[edge_key(a, b)];
      if (count > 2) throw std::logic_error("nonconforming mesh: edge shared by >2 elements");
      if (count != 1) continue;
      const Node& na = nodes[a];
      const Node& nb = nodes[b];
      BoundaryFacet f;
      f.element = e;
      f.local_edge = k;
      if (na.t == t_initial && nb.t == t_initial)
        f.tag = FacetTag::InitialTime;
      else if (na.t == t_final && nb.t == t_final)
        f.tag = FacetTag::FinalTime;
      else if (na.x == x_left && nb.x == x_left)
        f.tag = FacetTag::SpatialLeft;
      else if (na.x == x_right && nb.x == x_right)
        f.tag = FacetTag::SpatialRight;
      else
        throw std::logic_error("boundary facet not on any tagged boundary line");
      facets.push_back(f);
    }
  }
}

namespace {

void check_extents(double x_left, double x_right, double t_begin, double t_end, int nx, int nt) {
  if (!(x_left < x_right)) throw std::invalid_argument("x_left must be < x_right");
  if (!(t_end > t_begin)) throw std::invalid_argument("time interval must be nonempty");
  if (nx < 1 || nt < 1) throw std::invalid_argument("cell counts must be >= 1");
}

std::vector<Node> grid_nodes(double x_left, double x_right, double t_begin, double t_end, int nx,
                             int nt) {
  std::vector<Node> nodes;
  nodes.reserve((nx + 1) * (nt + 1));
  for (int j = 0; j <= nt; ++j) {
    const double t =
        (j == 0) ? t_begin : (j == nt ? t_end : t_begin + (t_end - t_begin) * j / nt);
    for (int i = 0; i <= nx; ++i) {
      const double x = (i == 0) ? x_left : (i == nx ? x_right : x_left + (x_right - x_left) * i / nx);
      nodes.push_back({x, t});
    }
  }
  return nodes;
}

}  // namespace

SpaceTimeMesh build_cartesian_interval(double x_left, double x_right, double t_begin,
                                       double t_end, int nx, int nt) {
  check_extents(x_left, x_right, t_begin, t_end, nx, nt);
  SpaceTimeMesh mesh;
  mesh.x_left = x_left;
  mesh.x_right = x_right;
  mesh.t_initial = t_begin;
  mesh.t_final = t_end;
  mesh.nodes = grid_nodes(x_left, x_right, t_begin, t_end, nx, nt);
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < nt; ++j)
    for (int i = 0; i < nx; ++i) {
      Element el;
      el.kind = ElementKind::Quad;
      el.v = {id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)};
      mesh.elements.push_back(el);
    }
  mesh.finalize();
  return mesh;
}

SpaceTimeMesh build_cartesian(double x_left, double x_right, double t_final, int nx, int nt) {
  return build_cartesian_interval(x_left, x_right, 0.0, t_final, nx, nt);
}

SpaceTimeMesh build_simplicial(double x_left, double x_right, double t_final, int nx, int nt,
                               SimplicialPattern pattern) {
  check_extents(x_left, x_right, 0.0, t_final, nx, nt);
  SpaceTimeMesh mesh;
  mesh.x_left = x_left;
  mesh.x_right = x_right;
  mesh.t_final = t_final;
  mesh.nodes = grid_nodes(x_left, x_right, 0.0, t_final, nx, nt);
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < nt; ++j)
    for (int i = 0; i < nx; ++i) {
      const int bl = id(i, j), br = id(i + 1, j), tr = id(i + 1, j + 1), tl = id(i, j + 1);
      if (pattern == SimplicialPattern::DiagonalNE) {
        mesh.elements.push_back(make_triangle_longest_edge(bl, br, tr, mesh.nodes));
        mesh.elements.push_back(make_triangle_longest_edge(bl, tr, tl, mesh.nodes));
      } else {
        const Node& a = mesh.nodes[bl];
        const Node& c = mesh.nodes[tr];
        mesh.nodes.push_back({0.5 * (a.x + c.x), 0.5 * (a.t + c.t)});
        const int ctr = static_cast<int>(mesh.nodes.size()) - 1;
        mesh.elements.push_back(make_triangle_longest_edge(bl, br, ctr, mesh.nodes));
        mesh.elements.push_back(make_triangle_longest_edge(br, tr, ctr, mesh.nodes));
        mesh.elements.push_back(make_triangle_longest_edge(tr, tl, ctr, mesh.nodes));
        mesh.elements.push_back(make_triangle_longest_edge(tl, bl, ctr, mesh.nodes));
      }
    }
  mesh.finalize();
  return mesh;
}

SpaceTimeMesh uniform_refine(const SpaceTimeMesh& mesh) {
  SpaceTimeMesh out;
  out.x_left = mesh.x_left;
  out.x_right = mesh.x_right;
  out.t_initial = mesh.t_initial;
  out.t_final = mesh.t_final;
  out.slab_levels = mesh.slab_levels;
  out.nodes = mesh.nodes;

  std::unordered_map<std::uint64_t, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    out.nodes.push_back(
        {0.5 * (out.nodes[a].x + out.nodes[b].x), 0.5 * (out.nodes[a].t + out.nodes[b].t)});
    const int id = static_cast<int>(out.nodes.size()) - 1;
    midpoint.emplace(key, id);
    return id;
  };

  for (const Element& el : mesh.elements) {
    if (el.kind == ElementKind::Triangle) {
      const int a = el.v[0], b = el.v[1], c = el.v[2];
      const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
      out.elements.push_back(make_triangle_longest_edge(a, ab, ca, out.nodes));
      out.elements.push_back(make_triangle_longest_edge(ab, b, bc, out.nodes));
      out.elements.push_back(make_triangle_longest_edge(ca, bc, c, out.nodes));
      out.elements.push_back(make_triangle_longest_edge(ab, bc, ca, out.nodes));
    } else {
      const int a = el.v[0], b = el.v[1], c = el.v[2], d = el.v[3];
      const int ab = mid(a, b), bc = mid(b, c), cd = mid(c, d), da = mid(d, a);
      out.nodes.push_back({0.25 * (out.nodes[a].x + out.nodes[b].x + out.nodes[c].x + out.nodes[d].x),
                           0.25 * (out.nodes[a].t + out.nodes[b].t + out.nodes[c].t + out.nodes[d].t)});
      const int ctr = static_cast<int>(out.nodes.size()) - 1;
      auto push = [&](int p, int q, int r, int s) {
        Element q4;
        q4.kind = ElementKind::Quad;
        q4.v = {p, q, r, s};
        out.elements.push_back(q4);
      };
      push(a, ab, ctr, da);
      push(ab, b, bc, ctr);
      push(ctr, bc, c, cd);
      push(da, ctr, cd, d);
    }
  }
  out.finalize();
  return out;
}

namespace {

// Mutable refinement state for newest-vertex bisection.
struct Bisector {
  std::vector<Node>& nodes;
  std::vector<Element>& elements;
  std::vector<char> alive;
  std::unordered_map<std::uint64_t, std::array<int, 2>> edge_elems;
  std::unordered_map<std::uint64_t, int> midpoint;

  Bisector(std::vector<Node>& n, std::vector<Element>& e) : nodes(n), elements(e) {
    alive.assign(elements.size(), 1);
    for (int id = 0; id < static_cast<int>(elements.size()); ++id) register_element(id);
  }

  void register_element(int id) {
    const Element& el = elements[id];
    for (int k = 0; k < 3; ++k) {
      const auto key = edge_key(el.v[k], el.v[(k + 1) % 3]);
      auto& slot = edge_elems.try_emplace(key, std::array<int, 2>{-1, -1}).first->second;
      if (slot[0] < 0)
        slot[0] = id;
      else if (slot[1] < 0)
        slot[1] = id;
      else
        throw std::logic_error("edge shared by more than two triangles");
    }
  }

  void unregister_element(int id) {
    const Element& el = elements[id];
    for (int k = 0; k < 3; ++k) {
      auto& slot = edge_elems[edge_key(el.v[k], el.v[(k + 1) % 3])];
      if (slot[0] == id) slot[0] = slot[1];
      slot[1] = -1;
    }
  }

  int neighbor_across(std::uint64_t key, int self) const {
    auto it = edge_elems.find(key);
    if (it == edge_elems.end()) return -1;
    if (it->second[0] == self) return it->second[1];
    return it->second[0];
  }

  std::uint64_t refinement_edge(int id) const {
    return edge_key(elements[id].v[0], elements[id].v[1]);
  }

  int midpoint_of(int a, int b) {
    const auto key = edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    nodes.push_back({0.5 * (nodes[a].x + nodes[b].x), 0.5 * (nodes[a].t + nodes[b].t)});
    const int id = static_cast<int>(nodes.size()) - 1;
    midpoint.emplace(key, id);
    return id;
  }

  void split(int id, int m) {
    const Element el = elements[id];
    unregister_element(id);
    alive[id] = 0;
    elements.push_back(make_triangle_child(el.v[0], el.v[2], m, nodes));
    elements.push_back(make_triangle_child(el.v[1], el.v[2], m, nodes));
    alive.push_back(1);
    alive.push_back(1);
    register_element(static_cast<int>(elements.size()) - 2);
    register_element(static_cast<int>(elements.size()) - 1);
  }

  void bisect(int id, int depth = 0) {
    if (depth > 4096) throw std::logic_error("bisection closure did not terminate");
    while (true) {
      const auto edge = refinement_edge(id);
      const int nb = neighbor_across(edge, id);
      if (nb >= 0 && refinement_edge(nb) != edge) {
        bisect(nb, depth + 1);
        continue;  // the neighbor across `edge` is now a compatible child
      }
      const int m = midpoint_of(elements[id].v[0], elements[id].v[1]);
      split(id, m);
      if (nb >= 0) split(nb, m);
      return;
    }
  }
};

}  // namespace

std::vector<int> doerfler_mark(const std::vector<double>& element_errors, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must be in (0,1]");
  for (double e : element_errors)
    if (!(e >= 0.0)) throw std::invalid_argument("error indicators must be nonnegative");

  std::vector<int> order(element_errors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return element_errors[a] > element_errors[b];
  });
  double total = 0.0;
  for (int e : order) total += element_errors[e] * element_errors[e];

  std::vector<int> marked;
  if (total > 0.0) {
    double acc = 0.0;
    for (int e : order) {
      marked.push_back(e);
      acc += element_errors[e] * element_errors[e];
      if (acc >= theta * theta * total) break;
    }
  }
  return marked;
}

SpaceTimeMesh adaptive_refine(const SpaceTimeMesh& mesh, const std::vector<double>& element_errors,
                              double theta) {
  if (static_cast<int>(element_errors.size()) != mesh.num_elements())
    throw std::invalid_argument("one error indicator per element required");
  for (const Element& el : mesh.elements)
    if (el.kind == ElementKind::Quad)
      throw std::invalid_argument("adaptive refinement is simplicial-only");

  const std::vector<int> marked = doerfler_mark(element_errors, theta);

  SpaceTimeMesh out;
  out.x_left = mesh.x_left;
  out.x_right = mesh.x_right;
  out.t_initial = mesh.t_initial;
  out.t_final = mesh.t_final;
  out.slab_levels = mesh.slab_levels;
  out.nodes = mesh.nodes;
  out.elements = mesh.elements;

  Bisector bis(out.nodes, out.elements);
  for (int e : marked)
    if (bis.alive[e]) bis.bisect(e);

  std::vector<Element> compact;
  compact.reserve(out.elements.size());
  for (int e = 0; e < static_cast<int>(out.elements.size()); ++e)
    if (bis.alive[e]) compact.push_back(out.elements[e]);
  out.elements = std::move(compact);
  out.finalize();
  return out;
}

PointLocation locate_point(const SpaceTimeMesh& mesh, double x, double t) {
  const double rtol = 1e-10;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Eigen::Vector2d ref = mesh.reference_coordinates(e, x, t);
    const double xi = ref[0], eta = ref[1];
    if (mesh.elements[e].kind == ElementKind::Triangle) {
      if (xi >= -rtol && eta >= -rtol && xi + eta <= 1.0 + rtol) {
        PointLocation loc;
        loc.element = e;
        loc.xi = std::clamp(xi, 0.0, 1.0);
        loc.eta = std::clamp(eta, 0.0, 1.0 - loc.xi);
        return loc;
      }
    } else {
      if (xi >= -1.0 - rtol && xi <= 1.0 + rtol && eta >= -1.0 - rtol && eta <= 1.0 + rtol) {
        PointLocation loc;
        loc.element = e;
        loc.xi = std::clamp(xi, -1.0, 1.0);
        loc.eta = std::clamp(eta, -1.0, 1.0);
        return loc;
      }
    }
  }
  throw std::domain_error("point outside the space-time cylinder");
}

void dump_mesh(const SpaceTimeMesh& mesh, std::ostream& os) {
  for (int n = 0; n < mesh.num_nodes(); ++n)
    os << n << ',' << mesh.nodes[n].x << ',' << mesh.nodes[n].t << '\n';
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    os << e << ',' << (el.kind == ElementKind::Triangle ? "Triangle" : "Quad");
    for (int k = 0; k < el.nvert(); ++k) os << ',' << el.v[k];
    os << '\n';
  }
}

}  // namespace crossdiff
