#include "crossdiff/experiments.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <thread>

namespace crossdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

StateVec scalar_state(double v) {
  StateVec s(1);
  s[0] = v;
  return s;
}

}  // namespace

void jiggle_mesh(SpaceTimeMesh& mesh, double relative_amplitude, double cell_size,
                 unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-relative_amplitude, relative_amplitude);
  for (Node& n : mesh.nodes) {
    const bool on_x = n.x == mesh.x_left || n.x == mesh.x_right;
    const bool on_t = n.t == mesh.t_initial || n.t == mesh.t_final;
    if (!on_x) n.x += u(rng) * cell_size;
    if (!on_t) n.t += u(rng) * cell_size;
  }
  mesh.finalize();
}

ManufacturedProblem heat_manufactured() {
  ManufacturedProblem prob;
  const double tau = 7.0;
  prob.system = scaled_heat(1.0 / tau);
  prob.x_left = 0.0;
  prob.x_right = 1.0;
  prob.t_final = 1.0;
  prob.exact_rho = [tau](double x, double t) {
    return scalar_state(0.5 * std::exp(-4.0 * kPi * kPi * t / tau) * std::cos(2.0 * kPi * x) + 0.5);
  };
  prob.homogeneous_neumann = true;
  prob.exact_flux_x = [tau](double x, double t) {
    return scalar_state(-(1.0 / tau) * kPi * std::exp(-4.0 * kPi * kPi * t / tau) *
                        std::sin(2.0 * kPi * x));
  };
  prob.rho0 = [exact = prob.exact_rho](double x) { return exact(x, 0.0); };
  // rho_0 touches 0 and 1 at isolated points, so s'(rho_0) is unbounded and
  // a clamped interpolated guess stalls Newton; start from w = 0 instead.
  prob.zero_start = true;
  return prob;
}

ManufacturedProblem porous_manufactured() {
  ManufacturedProblem prob;
  const double m = 2.0, alpha = 2.0, beta = 5.0;
  prob.system = porous_medium(m);
  prob.x_left = 0.0;
  prob.x_right = 1.0;
  prob.t_final = 1.0;
  prob.exact_rho = [=](double x, double t) {
    return scalar_state((x - alpha) * (x - alpha) / (2.0 * m * (m + 1.0) * (beta - t)));
  };
  prob.exact_flux_x = [=](double x, double t) {
    const double rho = (x - alpha) * (x - alpha) / (2.0 * m * (m + 1.0) * (beta - t));
    const double drho = 2.0 * (x - alpha) / (2.0 * m * (m + 1.0) * (beta - t));
    return scalar_state(m * rho * drho);  // A(rho) d_x rho, m = 2
  };
  prob.rho0 = [exact = prob.exact_rho](double x) { return exact(x, 0.0); };
  return prob;
}

ManufacturedProblem fisher_manufactured() {
  ManufacturedProblem prob;
  prob.system = fisher_kpp(1.0, 2.0);
  prob.x_left = 0.0;
  prob.x_right = 1.0;
  prob.t_final = 1.0;
  auto wave = [](double x, double t) {
    return std::exp(-5.0 / 6.0 * t + x / std::sqrt(6.0));
  };
  prob.exact_rho = [wave](double x, double t) {
    const double e = wave(x, t);
    return scalar_state(1.0 / ((1.0 + e) * (1.0 + e)));
  };
  prob.exact_flux_x = [wave](double x, double t) {
    const double e = wave(x, t);
    return scalar_state(-2.0 * e / (std::sqrt(6.0) * (1.0 + e) * (1.0 + e) * (1.0 + e)));
  };
  prob.rho0 = [exact = prob.exact_rho](double x) { return exact(x, 0.0); };
  return prob;
}

SpaceTimeMesh build_problem_mesh(const ManufacturedProblem& problem, const MeshSpec& spec) {
  SpaceTimeMesh mesh =
      spec.cartesian
          ? build_cartesian(problem.x_left, problem.x_right, problem.t_final, spec.nx, spec.nt)
          : build_simplicial(problem.x_left, problem.x_right, problem.t_final, spec.nx, spec.nt,
                             spec.pattern);
  for (int r = 0; r < spec.refinements; ++r) mesh = uniform_refine(mesh);
  if (spec.jiggle > 0.0) {
    if (spec.cartesian) throw std::invalid_argument("jiggle applies to simplicial meshes only");
    const double cell = (problem.x_right - problem.x_left) / (spec.nx << spec.refinements);
    jiggle_mesh(mesh, spec.jiggle, cell, spec.jiggle_seed);
  }
  return mesh;
}

ResidualContext SolvedProblem::context() const {
  ResidualContext ctx;
  ctx.space = space.get();
  ctx.current_space = current_space.get();
  ctx.system = &system;
  ctx.rho0 = rho0;
  ctx.config = config;
  return ctx;
}

namespace {

SolvedProblem solve_single(CrossDiffusionSystem system, SpaceTimeMesh mesh, int p,
                           SchemeConfig config, std::function<StateVec(double)> rho0,
                           const NewtonConfig& newton, int q,
                           const std::vector<double>& eps_schedule = {}) {
  SolvedProblem out;
  out.system = std::move(system);
  out.mesh = std::make_unique<SpaceTimeMesh>(std::move(mesh));
  out.space = std::make_unique<FeSpace>(build_space(*out.mesh, p, out.system.components));
  if (config.formulation == Formulation::MixedImplicitCurrent)
    out.current_space = std::make_unique<FeSpace>(
        build_space(*out.mesh, q > 0 ? q : p, out.system.components));
  out.rho0 = std::move(rho0);
  out.config = std::move(config);
  const ResidualContext ctx = out.context();
  if (eps_schedule.empty()) {
    out.report = newton_solve(ctx, initial_guess(ctx), newton);
  } else {
    out.report = eps_continuation(ctx, eps_schedule, newton);
    out.config.epsilon = out.report.epsilon_used;
  }
  return out;
}

}  // namespace

SolvedProblem solve_manufactured(const ManufacturedProblem& problem, const MeshSpec& mesh_spec,
                                 int p, double epsilon, const NewtonConfig& newton,
                                 Formulation formulation, int q) {
  SchemeConfig config;
  config.epsilon = epsilon;
  config.formulation = formulation;
  if (!problem.homogeneous_neumann) {
    const double x_mid = 0.5 * (problem.x_left + problem.x_right);
    config.neumann_flux = [flux = problem.exact_flux_x, x_mid](double x, double t) {
      const double nu = x < x_mid ? -1.0 : 1.0;
      return StateVec(nu * flux(x, t));
    };
  }
  SolvedProblem out;
  out.system = problem.system;
  out.mesh = std::make_unique<SpaceTimeMesh>(build_problem_mesh(problem, mesh_spec));
  out.space = std::make_unique<FeSpace>(build_space(*out.mesh, p, out.system.components));
  if (formulation == Formulation::MixedImplicitCurrent)
    out.current_space =
        std::make_unique<FeSpace>(build_space(*out.mesh, q > 0 ? q : p, out.system.components));
  out.rho0 = problem.rho0;
  out.config = std::move(config);
  const ResidualContext ctx = out.context();
  const Vector w0 =
      problem.zero_start ? Vector::Zero(ctx.total_dofs()) : initial_guess(ctx);
  out.report = newton_solve(ctx, w0, newton);
  return out;
}

double manufactured_l2_error(const ManufacturedProblem& problem, const SolvedProblem& solved) {
  const EntropyDensity& ent = solved.system.entropy;
  const Vector w = solved.report.coefficients.head(solved.space->total_dofs());
  return l2_error(
      *solved.space, w, [&](const StateVec& wv) { return ent.u(wv); }, problem.exact_rho);
}

std::vector<ConvergenceRecord> convergence_sweep(const ManufacturedProblem& problem,
                                                 const SweepOptions& options) {
  const int levels = options.refinements + 1;
  // Each resolution level gets its own mesh (with a level-frozen jiggle seed
  // when perturbation is requested).
  std::vector<SpaceTimeMesh> meshes;
  meshes.reserve(levels);
  for (int l = 0; l < levels; ++l) {
    MeshSpec spec = options.base_mesh;
    spec.nx <<= l;
    spec.nt <<= l;
    spec.jiggle_seed = options.base_mesh.jiggle_seed + 13u * static_cast<unsigned>(l);
    meshes.push_back(build_problem_mesh(problem, spec));
  }

  struct Cell {
    int p, level;
  };
  std::vector<Cell> cells;
  for (int p : options.p_list)
    for (int l = 0; l < levels; ++l) cells.push_back({p, l});
  std::vector<ConvergenceRecord> records(cells.size());

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell cell = cells[i];
      SchemeConfig config;
      config.epsilon = options.epsilon;
      if (!problem.homogeneous_neumann) {
        const double x_mid = 0.5 * (problem.x_left + problem.x_right);
        config.neumann_flux = [flux = problem.exact_flux_x, x_mid](double x, double t) {
          const double nu = x < x_mid ? -1.0 : 1.0;
          return StateVec(nu * flux(x, t));
        };
      }
      const FeSpace space = build_space(meshes[cell.level], cell.p, problem.system.components);
      ResidualContext ctx;
      ctx.space = &space;
      ctx.system = &problem.system;
      ctx.rho0 = problem.rho0;
      ctx.config = config;
      const Vector w0 =
          problem.zero_start ? Vector::Zero(ctx.total_dofs()) : initial_guess(ctx);
      const SolveReport report = newton_solve(ctx, w0, options.newton);

      ConvergenceRecord rec;
      rec.h = meshes[cell.level].h;
      rec.p = cell.p;
      rec.epsilon = options.epsilon;
      rec.dofs = space.total_dofs();
      rec.newton_iterations = report.iterations;
      if (report.converged) {
        const EntropyDensity& ent = problem.system.entropy;
        rec.error = l2_error(
            space, report.coefficients, [&](const StateVec& wv) { return ent.u(wv); },
            problem.exact_rho);
      }
      records[i] = rec;
    }
  };
  int n_threads = options.threads > 0 ? options.threads
                                      : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(cells.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Rates against the next-coarser level at the same p.
  for (size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].level == 0) continue;
    const size_t prev = i - 1;  // cells are level-contiguous per p
    if (records[i].error && records[prev].error && *records[prev].error > 0.0)
      records[i].rate = std::log2(*records[prev].error / *records[i].error);
  }
  return records;
}

std::vector<AdaptiveRecord> heat_adaptive_experiment(const AdaptiveOptions& options) {
  const ManufacturedProblem problem = heat_manufactured();
  SpaceTimeMesh mesh = build_problem_mesh(problem, options.base_mesh);
  std::vector<AdaptiveRecord> records;
  for (int level = 0; level < options.max_levels; ++level) {
    const FeSpace space = build_space(mesh, options.p, 1);
    ResidualContext ctx;
    ctx.space = &space;
    ctx.system = &problem.system;
    ctx.rho0 = problem.rho0;
    const Vector w0 =
        problem.zero_start ? Vector::Zero(ctx.total_dofs()) : initial_guess(ctx);
    const SolveReport report = newton_solve(ctx, w0, options.newton);
    if (!report.converged) throw SolverError("adaptive loop: solve did not converge");
    const EntropyDensity& ent = problem.system.entropy;
    const double error = l2_error(
        space, report.coefficients, [&](const StateVec& wv) { return ent.u(wv); },
        problem.exact_rho);
    records.push_back({level, space.total_dofs(), error, mesh.num_elements()});
    if (options.target_error > 0.0 && error <= options.target_error) break;
    const auto eta = flux_error_indicator(space, report.coefficients, problem.system);
    mesh = adaptive_refine(mesh, eta, options.theta);
  }
  return records;
}

WaitingTimeResult waiting_time_experiment(double epsilon, int p, double threshold,
                                          const std::vector<double>& eps_schedule) {
  const double x_right = 1.5 * kPi;
  const double t_final = 0.2;
  const int nx = 94;  // h_s ~ 0.05
  const int nt = 8;   // h_t ~ h_s / 2

  auto rho0 = [](double x) {
    if (x >= 0.25 * kPi && x <= 1.25 * kPi) {
      const double s = std::sin(x - 0.25 * kPi);
      return scalar_state(std::max(s * s, 1e-16));
    }
    return scalar_state(1e-16);
  };

  WaitingTimeResult result;
  result.solved.system = porous_medium(2.0);
  result.solved.mesh =
      std::make_unique<SpaceTimeMesh>(build_cartesian(0.0, x_right, t_final, nx, nt));
  result.solved.space = std::make_unique<FeSpace>(build_space(*result.solved.mesh, p, 1));
  result.solved.rho0 = rho0;
  result.solved.config.epsilon = epsilon;
  const ResidualContext ctx = result.solved.context();

  // Asymmetric clamp: the zero plateaus are genuinely at the boundary of the
  // admissible set (keep the tight margin), while the peak touches 1 only at
  // one point (loose margin avoids an isolated initial-guess spike).
  const EntropyDensity& ent = result.solved.system.entropy;
  const Vector w0 = interpolate(*result.solved.space, [&](double x, double) {
    StateVec r = rho0(x);
    r[0] = std::clamp(r[0], 1e-7, 1.0 - 1e-2);
    return ent.grad_s(r);
  });
  if (eps_schedule.empty()) {
    result.solved.report = newton_solve(ctx, w0);
  } else {
    result.solved.report = eps_continuation_from(ctx, eps_schedule, w0);
    result.solved.config.epsilon = result.solved.report.epsilon_used;
  }

  const int samples = 1000;
  const double x_probe = 0.25 * kPi;
  for (int j = 0; j < samples; ++j) {
    const double t = t_final * j / (samples - 1.0);
    const PointLocation loc = locate_point(*result.solved.mesh, x_probe, t);
    const FieldValue fv =
        evaluate_field(*result.solved.space, result.solved.report.coefficients, loc.element,
                       loc.xi, loc.eta);
    result.times.push_back(t);
    result.interface_values.push_back(ent.u(fv.value)[0]);
    if (!result.crossing && result.interface_values.back() > threshold) result.crossing = t;
  }
  return result;
}

std::vector<SlabField> FisherJumpRun::fields() const {
  std::vector<SlabField> f;
  for (size_t k = 0; k < slabs.reports.size(); ++k)
    f.push_back({slabs.spaces[k].get(), &slabs.reports[k].coefficients});
  return f;
}

FisherJumpRun fisher_jump_experiment(double n, double t_final, double epsilon) {
  FisherJumpRun run;
  run.system = fisher_kpp(1e-4, n);

  SlabProblem problem;
  problem.x_left = 0.0;
  problem.x_right = 1.0;
  problem.nx = 40;         // h_s = 0.025
  problem.nt_per_slab = 10;  // h_t = 0.4, slabs of height 4
  problem.order = 3;
  const int n_slabs = std::max(1, static_cast<int>(std::lround(t_final / 4.0)));
  for (int k = 0; k <= n_slabs; ++k) problem.t_levels.push_back(t_final * k / n_slabs);
  problem.system = &run.system;
  problem.config.epsilon = epsilon;
  problem.rho0 = [](double x) { return scalar_state(x <= 0.5 ? 1.0 : 0.0); };

  run.slabs = slab_solve(problem);
  return run;
}

FisherEntropyCompareResult fisher_entropy_compare(double t_final, double epsilon) {
  FisherEntropyCompareResult result{fisher_jump_experiment(2.0, t_final, epsilon),
                                    fisher_jump_experiment(2.1, t_final, epsilon),
                                    {},
                                    {},
                                    {}};
  if (!result.run_n2.slabs.completed || !result.run_n21.slabs.completed) return result;
  std::vector<double> times;
  for (double t = 0.0; t <= t_final + 1e-12; t += 0.4) times.push_back(std::min(t, t_final));

  result.series_n2 = entropy_series(result.run_n2.fields(), result.run_n2.system.entropy,
                                    EntropyDensity::scaled_log(2.0), times);
  result.series_n21 = entropy_series(result.run_n21.fields(), result.run_n21.system.entropy,
                                     EntropyDensity::scaled_log(2.1), times);
  result.series_boltzmann = entropy_series(result.run_n2.fields(), result.run_n2.system.entropy,
                                           EntropyDensity::boltzmann(), times);
  return result;
}

DuncanToorResult duncan_toor_experiment(int p, double epsilon, double slab_dt, int n_slabs) {
  const double x_right = 171.9;  // mm
  const double x_mid = 0.5 * x_right;
  const int nx = 82;  // h_s ~ 2.1 mm, even so the jump sits on a node

  DuncanToorResult result;
  const CrossDiffusionSystem system = duncan_toor_system();

  StateVec left(2), right(2);
  left << 0.000, 0.501;
  right << 0.501, 0.499;
  result.equilibrium = 0.5 * (left + right);

  SlabProblem problem;
  problem.x_left = 0.0;
  problem.x_right = x_right;
  problem.nx = nx;
  problem.nt_per_slab = 1;
  problem.order = p;
  for (int k = 0; k <= n_slabs; ++k) problem.t_levels.push_back(slab_dt * k);
  problem.system = &system;
  problem.config.epsilon = epsilon;
  problem.rho0 = [=](double x) -> StateVec { return x <= x_mid ? left : right; };

  result.slabs = slab_solve(problem);
  result.completed = result.slabs.completed;

  std::vector<SlabField> fields;
  for (size_t k = 0; k < result.slabs.reports.size(); ++k)
    fields.push_back({result.slabs.spaces[k].get(), &result.slabs.reports[k].coefficients});
  if (fields.empty()) return result;

  const double t_end = result.slabs.meshes[fields.size() - 1]->t_final;
  std::vector<double> times;
  for (double t = 0.0; t <= t_end + 1e-9; t += 0.5 * slab_dt) times.push_back(std::min(t, t_end));
  result.times = times;

  const ProbeSeries probes =
      probe_average_series(fields, system.entropy, 0.0, x_mid, times);
  for (const StateVec& v : probes.values) {
    result.hydrogen_left.push_back(v[0]);
    result.nitrogen_left.push_back(v[1]);
    result.carbon_dioxide_left.push_back(1.0 - v[0] - v[1]);
  }
  result.relative_entropy =
      entropy_series(fields, system.entropy, system.entropy, times, result.equilibrium);
  return result;
}

MixedCrosscheckResult mixed_heat_crosscheck(int nx, int nt, int p) {
  const ManufacturedProblem problem = heat_manufactured();
  MeshSpec spec;
  spec.cartesian = true;
  spec.nx = nx;
  spec.nt = nt;

  MixedCrosscheckResult result{
      solve_manufactured(problem, spec, p, 0.0),
      {},
      0.0};

  // The N=1 Maxwell-Stefan system with D12 = kappa reduces to the same heat
  // equation; solve it in the implicit-current formulation.
  const double kappa = problem.system.kappa;
  CrossDiffusionSystem ms = maxwell_stefan_system(
      make_ms_coefficients({{0.0, kappa}, {kappa, 0.0}}));
  SchemeConfig config;
  config.formulation = Formulation::MixedImplicitCurrent;
  result.mixed = solve_single(std::move(ms), build_problem_mesh(problem, spec), p, config,
                              problem.rho0, NewtonConfig{}, p);

  // L2(Q_T) distance between the two transformed solutions on the shared mesh.
  const FeSpace& sp = *result.primal.space;
  const FeSpace& sm = *result.mixed.space;
  const Vector wp = result.primal.report.coefficients;
  const Vector wm = result.mixed.report.coefficients.head(sm.total_dofs());
  const EntropyDensity& ent = problem.system.entropy;
  double acc = 0.0;
  const SpaceTimeMesh& mesh = *result.primal.mesh;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const QuadratureRule& rule = quadrature(mesh.elements[e].kind, 2 * p + 2);
    for (int q = 0; q < rule.size(); ++q) {
      const double xi = rule.points(q, 0), eta = rule.points(q, 1);
      const StateVec up = ent.u(evaluate_field(sp, wp, e, xi, eta).value);
      const StateVec um = ent.u(evaluate_field(sm, wm, e, xi, eta).value);
      acc += rule.weights[q] * mesh.jacobian(e, xi, eta).determinant() * (up - um).squaredNorm();
    }
  }
  result.l2_difference = std::sqrt(acc);
  return result;
}

MsOpenResult ms_open_experiment(int nx, int nt, int p) {
  const double x_right = 20.0;  // mm
  const double t_final = 5.0;   // s
  StateVec left(2), right(2);
  left << 0.10, 0.60;
  right << 0.45, 0.15;
  auto profile = [=](double x) -> StateVec {
    const double s = x / x_right;
    return StateVec((1.0 - s) * left + s * right);
  };

  SchemeConfig config;
  config.formulation = Formulation::MixedImplicitCurrent;
  DirichletConfig dirichlet;
  dirichlet.eta = 1.0;
  dirichlet.data = [=](double x, double) { return profile(x); };
  config.dirichlet = dirichlet;

  MsOpenResult result;
  result.solved = solve_single(duncan_toor_system(), build_cartesian(0.0, x_right, t_final, nx, nt),
                               p, config, profile, NewtonConfig{}, p);
  if (!result.solved.report.converged) return result;

  const SolvedProblem& s = result.solved;
  const EntropyDensity& ent = s.system.entropy;
  const Vector w = s.report.coefficients.head(s.space->total_dofs());
  for (int j = 0; j <= 40; ++j) {
    const double t = t_final * j / 40.0;
    result.times.push_back(t);
    const PointLocation loc = locate_point(*s.mesh, 0.5 * x_right, t);
    result.midpoint.push_back(ent.u(evaluate_field(*s.space, w, loc.element, loc.xi, loc.eta).value));
    result.relative_entropy.push_back(time_slice_integral_x(
        *s.space, w, t,
        [&](double x, const StateVec& wv) { return ent.relative_entropy(ent.u(wv), profile(x)); }));
  }
  return result;
}

OpenSystemResult open_system_experiment(int nx, int p, Formulation formulation) {
  auto profile = [](double x) { return 0.3 + 0.2 * x; };
  auto rho0 = [=](double x) { return scalar_state(profile(x)); };

  SchemeConfig config;
  config.formulation = formulation;
  DirichletConfig dirichlet;
  dirichlet.eta = 1.0;
  dirichlet.data = [=](double x, double) { return scalar_state(profile(x)); };
  config.dirichlet = dirichlet;

  OpenSystemResult result{
      solve_single(heat(), build_cartesian(0.0, 1.0, 1.0, nx, nx), p, config, rho0,
                   NewtonConfig{}, p),
      0.0,
      {},
      {}};

  const SolvedProblem& s = result.solved;
  const EntropyDensity& ent = s.system.entropy;
  const Vector w = s.report.coefficients.head(s.space->total_dofs());
  for (int j = 0; j <= 32; ++j) {
    const double t = j / 32.0;
    for (double x : {0.0, 1.0}) {
      const PointLocation loc = locate_point(*s.mesh, x, t);
      const FieldValue fv = evaluate_field(*s.space, w, loc.element, loc.xi, loc.eta);
      result.endpoint_mismatch =
          std::max(result.endpoint_mismatch, std::abs(ent.u(fv.value)[0] - profile(x)));
    }
    result.times.push_back(t);
    result.relative_entropy.push_back(time_slice_integral_x(
        *s.space, w, t,
        [&](double x, const StateVec& wv) {
          return ent.relative_entropy(ent.u(wv), scalar_state(profile(x)));
        }));
  }
  return result;
}

}  // namespace crossdiff
