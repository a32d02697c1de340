#pragma once

#include <memory>
#include <vector>

#include "crossdiff/assembly.hpp"

namespace crossdiff {

struct NewtonConfig {
  double abs_tol{1e-10};
  double rel_tol{1e-9};
  int max_iterations{50};
  int max_halvings{12};
  double slope{0.25};  // accept when ||R(w + l d)|| <= (1 - slope*l) ||R(w)||
  // Componentwise trust box on the entropy variable: the line search starts
  // at l = min(1, max_step/|d|_inf). u' decays exponentially in |w|, so an
  // uncapped step can park dofs where the Jacobian column underflows while
  // barely moving the residual. <= 0 disables.
  double max_step{4.0};
};

struct SolveReport {
  bool converged{false};
  int iterations{0};
  std::vector<double> residual_norms;
  Vector coefficients;  // w, or [w; J] in the mixed formulation
  EntropyLedger ledger;
  BoundednessAudit audit;
  double wall_time_s{0.0};
  double epsilon_used{0.0};
  bool epsilon_bumped{false};
  bool continuation_fallback{false};
};

// Damped Newton with a sparse direct (LU) linear solve. A singular Jacobian
// is retried once with a 10x larger regularization parameter.
SolveReport newton_solve(const ResidualContext& ctx, const Vector& w0,
                         const NewtonConfig& cfg = {});

// w0 = s'(clamped rho_0), constant in time; the current block starts at zero.
Vector initial_guess(const ResidualContext& ctx, double delta0 = 1e-7);

// Solves along a strictly decreasing epsilon schedule, warm-starting each
// stage from the previous solution.
SolveReport eps_continuation(ResidualContext ctx, const std::vector<double>& schedule,
                             const NewtonConfig& cfg = {});
SolveReport eps_continuation_from(ResidualContext ctx, const std::vector<double>& schedule,
                                  const Vector& w0, const NewtonConfig& cfg = {});

struct SlabProblem {
  double x_left{0.0}, x_right{1.0};
  int nx{1};
  int nt_per_slab{1};
  int order{1};
  int current_order{-1};  // mixed formulation; -1 means = order
  std::vector<double> t_levels;  // 0 = t_0 < t_1 < ... < T
  const CrossDiffusionSystem* system{nullptr};
  SchemeConfig config;
  std::function<StateVec(double)> rho0;
  NewtonConfig newton;
  double clamp_delta{1e-7};
};

struct SlabSolve {
  std::vector<std::unique_ptr<SpaceTimeMesh>> meshes;
  std::vector<std::unique_ptr<FeSpace>> spaces;
  std::vector<std::unique_ptr<FeSpace>> current_spaces;  // mixed only
  std::vector<SolveReport> reports;
  bool completed{false};
};

// Solves slab-by-slab, restarting each slab from u(w) of the previous one
// evaluated on the interface. Aborts on the first failed slab, returning the
// partial results.
SlabSolve slab_solve(const SlabProblem& problem);

}  // namespace crossdiff
