#pragma once

#include <memory>

#include "crossdiff/diagnostics.hpp"
#include "crossdiff/solver.hpp"

namespace crossdiff {

// A problem with a known exact solution; exact_flux_x supplies the boundary
// data A(rho) d_x rho for inhomogeneous Neumann conditions. zero_start makes
// solves begin at w = 0 instead of the clamped interpolated initial guess
// (needed when rho_0 touches the boundary of the admissible set).
struct ManufacturedProblem {
  CrossDiffusionSystem system;
  double x_left{0.0}, x_right{1.0}, t_final{1.0};
  SpaceTimeFn exact_rho;
  SpaceTimeFn exact_flux_x;
  std::function<StateVec(double)> rho0;
  bool homogeneous_neumann{false};
  bool zero_start{false};
};

// rho = 0.5 exp(-4 pi^2 t / tau) cos(2 pi x) + 0.5 with tau = 7; the time
// rescaling makes this an exact solution of the constant-diffusion system
// with kappa = 1/tau and natural boundary data.
ManufacturedProblem heat_manufactured();
// rho = (x-alpha)^2 / (2 m (m+1) (beta-t))^{1/(m-1)}, m=2, alpha=2, beta=5.
ManufacturedProblem porous_manufactured();
// Traveling wave rho = (1 + exp(-5t/6 + x/sqrt(6)))^{-2}, A=1, n=2.
ManufacturedProblem fisher_manufactured();

// jiggle > 0 perturbs every node by a uniform random offset of that fraction
// of the cell size (boundary nodes slide along their boundary line), standing
// in for an unstructured space-time triangulation; time-aligned structured
// meshes lose one order for even p.
struct MeshSpec {
  bool cartesian{false};
  SimplicialPattern pattern{SimplicialPattern::CrissCross};
  int nx{4}, nt{4};
  int refinements{0};
  double jiggle{0.0};
  unsigned jiggle_seed{1};
};

SpaceTimeMesh build_problem_mesh(const ManufacturedProblem& problem, const MeshSpec& spec);

// Deterministic node perturbation; corners stay fixed and boundary nodes
// stay on their boundary lines.
void jiggle_mesh(SpaceTimeMesh& mesh, double relative_amplitude, double cell_size,
                 unsigned seed);

// One solved problem with owned mesh/space storage.
struct SolvedProblem {
  std::unique_ptr<SpaceTimeMesh> mesh;
  std::unique_ptr<FeSpace> space;
  std::unique_ptr<FeSpace> current_space;
  CrossDiffusionSystem system;
  std::function<StateVec(double)> rho0;
  SchemeConfig config;
  SolveReport report;

  ResidualContext context() const;
  SlabField field() const { return {space.get(), &report.coefficients}; }
};

SolvedProblem solve_manufactured(const ManufacturedProblem& problem, const MeshSpec& mesh_spec,
                                 int p, double epsilon, const NewtonConfig& newton = {},
                                 Formulation formulation = Formulation::Primal, int q = -1);

double manufactured_l2_error(const ManufacturedProblem& problem, const SolvedProblem& solved);

struct SweepOptions {
  std::vector<int> p_list{1, 2, 3};
  int refinements{4};
  MeshSpec base_mesh{};
  double epsilon{0.0};
  NewtonConfig newton;
  int threads{0};  // 0: hardware concurrency
};

std::vector<ConvergenceRecord> convergence_sweep(const ManufacturedProblem& problem,
                                                 const SweepOptions& options);

struct AdaptiveRecord {
  int level{0};
  int dofs{0};
  double error{0.0};
  int elements{0};
};

struct AdaptiveOptions {
  int p{1};
  double theta{0.5};
  int max_levels{12};
  double target_error{0.0};
  MeshSpec base_mesh{};
  NewtonConfig newton;
};

std::vector<AdaptiveRecord> heat_adaptive_experiment(const AdaptiveOptions& options);

struct WaitingTimeResult {
  SolvedProblem solved;
  std::vector<double> times;
  std::vector<double> interface_values;
  std::optional<double> crossing;
};

// Porous-medium waiting-time experiment: Omega = (0, 3 pi / 2), initial mass
// sin^2(x - pi/4) supported on [pi/4, 5 pi/4], probe at the left interface.
WaitingTimeResult waiting_time_experiment(double epsilon, int p, double threshold,
                                          const std::vector<double>& eps_schedule = {});

// Jump-datum Fisher-KPP runs are solved on time slabs of height 4 at the
// resolution h_s = 0.025, h_t = 0.4.
struct FisherJumpRun {
  CrossDiffusionSystem system;
  SlabSolve slabs;
  std::vector<SlabField> fields() const;
};

struct FisherEntropyCompareResult {
  FisherJumpRun run_n2;
  FisherJumpRun run_n21;
  EntropySeries series_n2;
  EntropySeries series_n21;
  EntropySeries series_boltzmann;  // evaluated on the n=2 solution
};

FisherEntropyCompareResult fisher_entropy_compare(double t_final, double epsilon);

FisherJumpRun fisher_jump_experiment(double n, double t_final, double epsilon);

struct DuncanToorResult {
  SlabSolve slabs;
  std::vector<double> times;
  std::vector<double> hydrogen_left;   // left-half averages
  std::vector<double> nitrogen_left;
  std::vector<double> carbon_dioxide_left;
  EntropySeries relative_entropy;
  StateVec equilibrium;
  bool completed{false};
};

DuncanToorResult duncan_toor_experiment(int p, double epsilon, double slab_dt, int n_slabs);

struct MixedCrosscheckResult {
  SolvedProblem primal;
  SolvedProblem mixed;
  double l2_difference{0.0};
};

// N=1 Maxwell-Stefan (implicit currents) against the primal constant-
// diffusion solve of the same manufactured problem.
MixedCrosscheckResult mixed_heat_crosscheck(int nx, int nt, int p);

struct OpenSystemResult {
  SolvedProblem solved;
  double endpoint_mismatch{0.0};  // max over samples of |u(w) - rho_D| at the ends
  std::vector<double> times;
  std::vector<double> relative_entropy;  // vs the Dirichlet profile
};

// Steady linear-in-x Dirichlet data imposed by Nitsche terms.
OpenSystemResult open_system_experiment(int nx, int p, Formulation formulation);

struct MsOpenResult {
  SolvedProblem solved;
  std::vector<double> times;
  std::vector<StateVec> midpoint;        // u(w) probed at the domain center
  std::vector<double> relative_entropy;  // vs the Dirichlet profile
};

// Two-component Maxwell-Stefan system (implicit currents) with Dirichlet
// mixtures imposed weakly at both ends.
MsOpenResult ms_open_experiment(int nx, int nt, int p);

}  // namespace crossdiff
