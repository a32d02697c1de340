#include "crossdiff/solver.hpp"

#include <Eigen/SparseLU>
#include <chrono>
#include <cmath>

namespace crossdiff {

namespace {

using Clock = std::chrono::steady_clock;

double finite_norm(const Vector& r) {
  const double n = r.norm();
  if (!std::isfinite(n)) throw NumericError("non-finite residual norm");
  return n;
}

}  // namespace

SolveReport newton_solve(const ResidualContext& ctx_in, const Vector& w0,
                         const NewtonConfig& cfg) {
  const auto start = Clock::now();
  ResidualContext ctx = ctx_in;

  SolveReport report;
  report.epsilon_used = ctx.config.epsilon;
  Vector w = w0;
  Vector residual;
  assemble(ctx, w, &residual, nullptr);
  double rnorm = finite_norm(residual);
  const double r0 = rnorm;
  report.residual_norms.push_back(rnorm);

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool pattern_analyzed = false;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (rnorm <= cfg.abs_tol || rnorm <= cfg.rel_tol * r0) {
      report.converged = true;
      break;
    }
    SparseMatrix jac;
    assemble(ctx, w, nullptr, &jac);
    Eigen::SparseMatrix<double> jac_cm(jac);
    if (!pattern_analyzed) {
      lu.analyzePattern(jac_cm);  // sparsity is fixed across Newton iterations
      pattern_analyzed = true;
    }
    lu.factorize(jac_cm);
    if (lu.info() != Eigen::Success) {
      if (!report.epsilon_bumped) {
        // One retry with a stronger regularization, as reported in the log.
        report.epsilon_bumped = true;
        ctx.config.epsilon = ctx.config.epsilon > 0.0 ? 10.0 * ctx.config.epsilon : 1e-10;
        report.epsilon_used = ctx.config.epsilon;
        assemble(ctx, w, &residual, nullptr);
        rnorm = finite_norm(residual);
        report.residual_norms.push_back(rnorm);
        continue;
      }
      throw SolverError("singular Jacobian after regularization retry");
    }
    const Vector delta = lu.solve(-residual);

    double lambda = 1.0;
    if (cfg.max_step > 0.0) {
      const double dmax = delta.cwiseAbs().maxCoeff();
      if (dmax > cfg.max_step) lambda = cfg.max_step / dmax;
    }
    bool accepted = false;
    Vector w_try, r_try;
    for (int halving = 0; halving <= cfg.max_halvings; ++halving) {
      w_try = w + lambda * delta;
      bool ok = true;
      double try_norm = 0.0;
      try {
        assemble(ctx, w_try, &r_try, nullptr);
        try_norm = finite_norm(r_try);
      } catch (const NumericError&) {
        ok = false;
      }
      if (ok && try_norm <= (1.0 - cfg.slope * lambda) * rnorm) {
        accepted = true;
        w = w_try;
        residual = r_try;
        rnorm = try_norm;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;  // stalled line search: report non-convergence
    ++report.iterations;
    report.residual_norms.push_back(rnorm);
    if (rnorm <= cfg.abs_tol || rnorm <= cfg.rel_tol * r0) {
      report.converged = true;
      break;
    }
  }
  if (!report.converged && (rnorm <= cfg.abs_tol || rnorm <= cfg.rel_tol * r0))
    report.converged = true;

  report.coefficients = std::move(w);
  if (report.converged) {
    report.ledger = entropy_ledger(ctx, report.coefficients);
    report.audit = audit_boundedness(ctx, report.coefficients);
  }
  report.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

Vector initial_guess(const ResidualContext& ctx, double delta0) {
  const EntropyDensity& ent = ctx.system->entropy;
  auto w_of_rho0 = [&](double x, double) -> StateVec {
    return ent.grad_s(ent.clamp_into_domain(ctx.rho0(x), delta0));
  };
  const Vector w0 = interpolate(*ctx.space, w_of_rho0);
  if (ctx.config.formulation == Formulation::Primal) return w0;
  Vector full = Vector::Zero(ctx.total_dofs());
  full.head(w0.size()) = w0;
  return full;
}

SolveReport eps_continuation(ResidualContext ctx, const std::vector<double>& schedule,
                             const NewtonConfig& cfg) {
  if (schedule.empty()) throw std::invalid_argument("empty epsilon schedule");
  for (size_t i = 0; i + 1 < schedule.size(); ++i)
    if (!(schedule[i] > schedule[i + 1]))
      throw std::invalid_argument("epsilon schedule must be strictly decreasing");
  if (schedule.back() < 0.0) throw std::invalid_argument("epsilon must be >= 0");

  ctx.config.epsilon = schedule.front();
  Vector w = initial_guess(ctx);
  return eps_continuation_from(std::move(ctx), schedule, w, cfg);
}

SolveReport eps_continuation_from(ResidualContext ctx, const std::vector<double>& schedule,
                                  const Vector& w0, const NewtonConfig& cfg) {
  // Intermediate stages only provide warm starts; they may stop earlier.
  NewtonConfig intermediate = cfg;
  intermediate.abs_tol = std::max(cfg.abs_tol, 1e-8);
  intermediate.rel_tol = std::max(cfg.rel_tol, 1e-6);

  Vector w = w0;
  bool fallback = false;
  SolveReport report;
  for (size_t i = 0; i < schedule.size(); ++i) {
    const bool last = i + 1 == schedule.size();
    ctx.config.epsilon = schedule[i];
    report = newton_solve(ctx, w, last ? cfg : intermediate);
    if (report.converged) {
      w = report.coefficients;
    } else if (!last) {
      fallback = true;  // keep the last convergent iterate and move on
    }
  }
  report.continuation_fallback = fallback;
  return report;
}

SlabSolve slab_solve(const SlabProblem& problem) {
  if (problem.t_levels.size() < 2) throw std::invalid_argument("need at least one slab");
  for (size_t i = 0; i + 1 < problem.t_levels.size(); ++i)
    if (!(problem.t_levels[i] < problem.t_levels[i + 1]))
      throw std::invalid_argument("slab levels must be strictly increasing");

  SlabSolve out;
  const int n_slabs = static_cast<int>(problem.t_levels.size()) - 1;
  std::function<StateVec(double)> rho0 = problem.rho0;

  const bool mixed = problem.config.formulation == Formulation::MixedImplicitCurrent;
  for (int k = 0; k < n_slabs; ++k) {
    auto mesh = std::make_unique<SpaceTimeMesh>(
        build_cartesian_interval(problem.x_left, problem.x_right, problem.t_levels[k],
                                 problem.t_levels[k + 1], problem.nx, problem.nt_per_slab));
    auto space = std::make_unique<FeSpace>(
        build_space(*mesh, problem.order, problem.system->components));
    std::unique_ptr<FeSpace> current_space;
    if (mixed) {
      const int q = problem.current_order > 0 ? problem.current_order : problem.order;
      current_space =
          std::make_unique<FeSpace>(build_space(*mesh, q, problem.system->components));
    }

    ResidualContext ctx;
    ctx.space = space.get();
    ctx.current_space = current_space.get();
    ctx.system = problem.system;
    ctx.rho0 = rho0;
    ctx.config = problem.config;

    const Vector w0 = initial_guess(ctx, problem.clamp_delta);
    SolveReport report = newton_solve(ctx, w0, problem.newton);
    if (!report.converged) {
      // Retry through a regularization continuation down to the target
      // epsilon; cold starts on jump data may need it.
      std::vector<double> schedule{1.0};
      while (schedule.back() > std::max(problem.config.epsilon, 1e-10) * 99.0)
        schedule.push_back(schedule.back() * 1e-2);
      schedule.push_back(problem.config.epsilon);
      report = eps_continuation_from(ctx, schedule, w0, problem.newton);
    }
    const bool ok = report.converged;

    out.meshes.push_back(std::move(mesh));
    out.spaces.push_back(std::move(space));
    if (mixed) out.current_spaces.push_back(std::move(current_space));
    out.reports.push_back(std::move(report));
    if (!ok) return out;  // abort with partial results

    // Interface transfer: rho_0^{k+1}(x) = u(w_h^k(x, t_{k+1})).
    const SpaceTimeMesh* prev_mesh = out.meshes.back().get();
    const FeSpace* prev_space = out.spaces.back().get();
    const Vector* prev_coeffs = &out.reports.back().coefficients;
    const EntropyDensity* ent = &problem.system->entropy;
    const double t_interface = problem.t_levels[k + 1];
    rho0 = [prev_mesh, prev_space, prev_coeffs, ent, t_interface](double x) -> StateVec {
      const PointLocation loc = locate_point(*prev_mesh, x, t_interface);
      const FieldValue fv = evaluate_field(*prev_space, *prev_coeffs, loc.element, loc.xi, loc.eta);
      return ent->u(fv.value);
    };
  }
  out.completed = true;
  return out;
}

}  // namespace crossdiff
