#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "crossdiff/quadrature.hpp"
#include "crossdiff/types.hpp"

namespace crossdiff {

enum class FacetTag { InitialTime, FinalTime, SpatialLeft, SpatialRight };
enum class SimplicialPattern { CrissCross, DiagonalNE };

struct Node {
  double x{0.0};
  double t{0.0};
};

// Triangles keep their bisection edge at (v[0],v[1]) with the peak (newest
// vertex) at v[2]; vertices are counterclockwise. Quads are counterclockwise
// with the reference square [-1,1]^2.
struct Element {
  ElementKind kind{ElementKind::Triangle};
  std::array<int, 4> v{-1, -1, -1, -1};

  int nvert() const { return kind == ElementKind::Triangle ? 3 : 4; }
  int nedges() const { return nvert(); }
};

struct BoundaryFacet {
  int element{-1};
  int local_edge{-1};
  FacetTag tag{FacetTag::InitialTime};
};

// Conforming mesh of the space-time cylinder (0,T) x (x_left,x_right).
// Immutable after construction; refinement returns a new mesh.
class SpaceTimeMesh {
 public:
  std::vector<Node> nodes;
  std::vector<Element> elements;
  std::vector<BoundaryFacet> facets;
  double x_left{0.0}, x_right{1.0};
  double t_initial{0.0}, t_final{1.0};
  double h{0.0};
  std::vector<double> slab_levels;  // ascending interior t-levels, may be empty

  double duration() const { return t_final - t_initial; }

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_elements() const { return static_cast<int>(elements.size()); }

  std::pair<int, int> edge_vertices(int element, int local_edge) const;
  double edge_length(int element, int local_edge) const;
  double element_diameter(int element) const;
  double signed_area(int element) const;

  // Reference map and its Jacobian (rows: x,t; cols: d/dxi, d/deta).
  Node map_to_physical(int element, double xi, double eta) const;
  Eigen::Matrix2d jacobian(int element, double xi, double eta) const;

  // Preimage of (x,t) under the reference map of one element (unclamped).
  // Exact for triangles (affine) and axis-aligned quads.
  Eigen::Vector2d reference_coordinates(int element, double x, double t) const;

  void finalize();  // recompute h, facet tags; validates conformity
};

SpaceTimeMesh build_cartesian(double x_left, double x_right, double t_final, int nx, int nt);
SpaceTimeMesh build_simplicial(double x_left, double x_right, double t_final, int nx, int nt,
                               SimplicialPattern pattern);

// Cartesian mesh of (t_begin, t_end) x (x_left, x_right); used by the
// sequential time-slab driver.
SpaceTimeMesh build_cartesian_interval(double x_left, double x_right, double t_begin,
                                       double t_end, int nx, int nt);

SpaceTimeMesh uniform_refine(const SpaceTimeMesh& mesh);

// Greedy minimal-cardinality set M with sum_{K in M} eta_K^2 >= theta^2 *
// sum_K eta_K^2, elements ordered by descending indicator.
std::vector<int> doerfler_mark(const std::vector<double>& element_errors, double theta);

// Doerfler marking followed by newest-vertex bisection with conforming
// closure. Simplicial meshes only.
SpaceTimeMesh adaptive_refine(const SpaceTimeMesh& mesh, const std::vector<double>& element_errors,
                              double theta);

struct PointLocation {
  int element{-1};
  double xi{0.0};
  double eta{0.0};
};

PointLocation locate_point(const SpaceTimeMesh& mesh, double x, double t);

void dump_mesh(const SpaceTimeMesh& mesh, std::ostream& os);

}  // namespace crossdiff
