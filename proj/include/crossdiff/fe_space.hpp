#pragma once

#include <functional>
#include <vector>

#include "crossdiff/mesh.hpp"
#include "crossdiff/quadrature.hpp"
#include "crossdiff/types.hpp"

namespace crossdiff {

// Scalar Lagrange basis on the reference element, equispaced nodes, p <= 6.
// Node order: vertices, then edge nodes per local edge (walking from the
// edge's first local vertex), then interior nodes.
class ReferenceBasis {
 public:
  ElementKind kind;
  int order;
  int size;

  struct NodeKey {
    enum Type { Vertex, Edge, Interior } type;
    int entity;    // local vertex or local edge index
    int position;  // 0-based along the edge / interior counter
  };

  Eigen::Matrix<double, Eigen::Dynamic, 2> nodes;
  std::vector<NodeKey> keys;

  void eval(double xi, double eta, Vector& values,
            Eigen::Matrix<double, Eigen::Dynamic, 2>& grads) const;

  ReferenceBasis(ElementKind kind, int order);

 private:
  Eigen::MatrixXd coeffs_;                // triangle only: Bernstein-to-Lagrange coefficients
  std::vector<std::pair<int, int>> grid_;  // quad only: tensor indices per node
};

const ReferenceBasis& reference_basis(ElementKind kind, int order);

// Continuous vector-valued Lagrange space on a space-time mesh. Coefficients
// are stored component-major: all scalar dofs of component 0, then 1, ...
class FeSpace {
 public:
  const SpaceTimeMesh* mesh{nullptr};
  int order{1};
  int components{1};
  int scalar_dofs{0};
  std::vector<std::vector<int>> element_dofs;  // scalar dof ids per element

  int total_dofs() const { return components * scalar_dofs; }
  int dof(int component, int scalar) const { return component * scalar_dofs + scalar; }
  const ReferenceBasis& basis(int element) const {
    return reference_basis(mesh->elements[element].kind, order);
  }
};

FeSpace build_space(const SpaceTimeMesh& mesh, int order, int components);

using SpaceTimeFn = std::function<StateVec(double x, double t)>;
using PointwiseMap = std::function<StateVec(const StateVec&)>;

Vector interpolate(const FeSpace& space, const SpaceTimeFn& g);

struct FieldValue {
  StateVec value;
  StateVec dx;  // spatial derivative
  StateVec dt;  // temporal derivative
};

FieldValue evaluate_field(const FeSpace& space, const Vector& coeffs, int element, double xi,
                          double eta);

struct TracePoint {
  int element{-1};
  double xi{0.0}, eta{0.0};
  double weight{0.0};  // physical 1D weight; sums to |Omega| over the trace
  double x{0.0};
  double t{0.0};
};

std::vector<TracePoint> trace_quadrature(const FeSpace& space, FacetTag tag);

double l2_error(const FeSpace& space, const Vector& coeffs, const PointwiseMap& transform,
                const SpaceTimeFn& exact);

// Integrates integrand(w_h(x,t0)) over {t=t0} x (x_lo,x_hi) by clipping the
// time slice against every element. Defaults cover the whole of Omega.
double time_slice_integral(const FeSpace& space, const Vector& coeffs, double t0,
                           const std::function<double(const StateVec&)>& integrand,
                           double x_lo = -1e300, double x_hi = 1e300);

// Same with the sample position passed through (x-dependent references).
double time_slice_integral_x(const FeSpace& space, const Vector& coeffs, double t0,
                             const std::function<double(double, const StateVec&)>& integrand,
                             double x_lo = -1e300, double x_hi = 1e300);

}  // namespace crossdiff
