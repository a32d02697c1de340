#pragma once

#include <Eigen/Dense>

#include "crossdiff/types.hpp"

namespace crossdiff {

enum class ElementKind { Triangle, Quad };

// Positive-weight rule on the reference element: unit triangle
// {(0,0),(1,0),(0,1)} (exact for total degree <= degree) or the square
// [-1,1]^2 (exact per-variable degree <= degree).
struct QuadratureRule {
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;
  Vector weights;
  int degree{0};

  int size() const { return static_cast<int>(weights.size()); }
};

// Gauss-Legendre nodes/weights on [-1,1], exact for degree 2n-1.
void gauss_legendre(int n, Vector& nodes, Vector& weights);

// Smallest Gauss-Legendre rule exact for the given polynomial degree.
void gauss_for_degree(int degree, Vector& nodes, Vector& weights);

const QuadratureRule& quadrature(ElementKind kind, int degree);

}  // namespace crossdiff
