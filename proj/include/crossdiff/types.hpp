#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>

namespace crossdiff {

// Species-space vectors/matrices. Systems have N <= 4 components, so these
// use fixed max sizes and never touch the heap in quadrature loops.
constexpr int kMaxComponents = 4;

using StateVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxComponents, 1>;
using StateMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxComponents, kMaxComponents>;

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct NumericError : std::runtime_error {
  int element_id;
  explicit NumericError(const std::string& what, int element = -1)
      : std::runtime_error(what), element_id(element) {}
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace crossdiff
