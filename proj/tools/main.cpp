// crossdiff: space-time Galerkin solver for cross-diffusion systems in
// entropy variables. Each subcommand runs one benchmark experiment and writes
// CSV outputs plus a run manifest.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crossdiff/experiments.hpp"
#include "crossdiff/io.hpp"

using namespace crossdiff;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Args {
  std::string subcommand;
  std::map<std::string, std::string> flags;

  bool has(const std::string& key) const { return flags.count(key) > 0; }
  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = flags.find(key);
    return it == flags.end() ? fallback : it->second;
  }
  double num(const std::string& key, double fallback) const {
    auto it = flags.find(key);
    return it == flags.end() ? fallback : std::stod(it->second);
  }
  int integer(const std::string& key, int fallback) const {
    auto it = flags.find(key);
    return it == flags.end() ? fallback : std::stoi(it->second);
  }
  // "a..b" inclusive or a single value
  std::vector<int> range(const std::string& key, std::vector<int> fallback) const {
    auto it = flags.find(key);
    if (it == flags.end()) return fallback;
    const std::string& v = it->second;
    const auto dots = v.find("..");
    if (dots == std::string::npos) return {std::stoi(v)};
    const int a = std::stoi(v.substr(0, dots));
    const int b = std::stoi(v.substr(dots + 2));
    std::vector<int> out;
    for (int k = a; k <= b; ++k) out.push_back(k);
    return out;
  }
  std::vector<double> list(const std::string& key, std::vector<double> fallback) const {
    auto it = flags.find(key);
    if (it == flags.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
  }
};

const char* kUsage = R"(usage: crossdiff <subcommand> [--key value ...]

subcommands:
  heat-convergence       h-sweep for the heat analog        [--p 1..3 --refinements 4 --eps 0]
  porous-convergence     h-sweep for the porous medium      [--p 1..3 --refinements 4 --eps 0]
  fisher-convergence     h-sweep for the Fisher-KPP wave    [--p 1..3 --refinements 4 --eps 0]
  porous-eps-sweep       error floor in the regularization  [--p 3 --refinements 4 --eps-values 1e-8,1e-10,1e-12]
  porous-waiting-time    interface tracking                 [--eps 1e-6 --p 5 --threshold 0.01]
  heat-adaptive          Doerfler-marked refinement         [--p 1 --theta 0.5 --levels 25]
  fisher-jump            jump datum, logistic growth        [--t-final 8 --eps 1e-8]
  fisher-entropy-compare entropy-density comparison         [--t-final 40 --eps 1e-8]
  ms-duncan-toor-1d      three-gas uphill diffusion         [--eps 1e-10 --p 2 --slab-dt 20.8 --slabs 36]
  ms-implicit-1d         mixed vs primal cross-check        [--p 2 --nx 8 --nt 8]
  ms-open-1d             Dirichlet-driven gas exchange      [--nx 20 --nt 20 --p 2]
  verify-hypotheses      sampled coercivity/reaction bounds [--samples 10000]
  selftest               property-test battery

common flags: --out DIR (default out/<subcommand>), --pattern crisscross|diagonal|cartesian,
              --jiggle 0.25, --threads N, --deterministic true
exit codes: 0 success, 1 usage error, 2 solver non-convergence
)";

std::string out_dir(const Args& args) {
  const std::string dir = args.str("out", "out/" + args.subcommand);
  std::filesystem::create_directories(dir);
  return dir;
}

Manifest base_manifest(const Args& args) {
  Manifest m;
  m.set("subcommand", args.subcommand);
  m.set("version", kVersion);
  m.set("compiler", __VERSION__);
  for (const auto& [k, v] : args.flags) m.set("flag." + k, v);
  return m;
}

MeshSpec mesh_spec_from(const Args& args, bool jiggle_default) {
  MeshSpec spec;
  const std::string pattern = args.str("pattern", "crisscross");
  if (pattern == "cartesian") {
    spec.cartesian = true;
  } else if (pattern == "diagonal") {
    spec.pattern = SimplicialPattern::DiagonalNE;
  } else if (pattern == "crisscross") {
    spec.pattern = SimplicialPattern::CrissCross;
  } else {
    throw std::invalid_argument("unknown mesh pattern: " + pattern);
  }
  spec.nx = args.integer("nx", 4);
  spec.nt = args.integer("nt", 4);
  spec.jiggle = args.num("jiggle", jiggle_default && !spec.cartesian ? 0.25 : 0.0);
  spec.jiggle_seed = static_cast<unsigned>(args.integer("jiggle-seed", 1));
  return spec;
}

void write_convergence_csv(const std::string& path, const std::vector<ConvergenceRecord>& records) {
  CsvFile csv(path, "h,p,eps,error,rate");
  for (const auto& r : records)
    csv.row({format_float(r.h), std::to_string(r.p), format_float(r.epsilon),
             r.error ? format_float(*r.error) : "", r.rate ? format_float(*r.rate) : ""});
}

void write_entropy_csv(const std::string& path, const EntropySeries& series) {
  CsvFile csv(path, "t,entropy,dissipation");
  for (size_t k = 0; k < series.times.size(); ++k)
    csv.row({format_float(series.times[k]), format_float(series.entropy[k]),
             format_float(series.dissipation[k])});
}

int run_convergence(const Args& args, const ManufacturedProblem& problem) {
  SweepOptions opts;
  opts.p_list = args.range("p", {1, 2, 3});
  opts.refinements = args.integer("refinements", 4);
  opts.base_mesh = mesh_spec_from(args, true);
  opts.epsilon = args.num("eps", 0.0);
  opts.threads = args.str("deterministic", "false") == "true" ? 1 : args.integer("threads", 0);

  const auto records = convergence_sweep(problem, opts);
  const std::string dir = out_dir(args);
  write_convergence_csv(dir + "/convergence.csv", records);

  bool all_converged = true;
  for (const auto& r : records) {
    std::printf("p=%d h=%-10.5g dofs=%-7d its=%-2d error=%-12.5g rate=%s\n", r.p, r.h, r.dofs,
                r.newton_iterations, r.error.value_or(-1.0),
                r.rate ? format_float(*r.rate).c_str() : "-");
    all_converged = all_converged && r.error.has_value();
  }
  Manifest m = base_manifest(args);
  m.set("records", static_cast<int>(records.size()));
  m.set("all_converged", all_converged);
  m.write(dir + "/manifest.txt");
  return all_converged ? 0 : 2;
}

int run_eps_sweep(const Args& args) {
  const ManufacturedProblem problem = porous_manufactured();
  const std::vector<double> eps_values = args.list("eps-values", {1e-8, 1e-10, 1e-12});
  const int p = args.integer("p", 3);
  const int refinements = args.integer("refinements", 4);

  std::vector<ConvergenceRecord> all;
  for (double eps : eps_values) {
    SweepOptions opts;
    opts.p_list = {p};
    opts.refinements = refinements;
    opts.base_mesh = mesh_spec_from(args, true);
    opts.epsilon = eps;
    opts.threads = args.str("deterministic", "false") == "true" ? 1 : args.integer("threads", 0);
    const auto records = convergence_sweep(problem, opts);
    all.insert(all.end(), records.begin(), records.end());
  }
  const std::string dir = out_dir(args);
  write_convergence_csv(dir + "/convergence.csv", all);
  bool ok = true;
  for (const auto& r : all) {
    std::printf("eps=%-8.1g h=%-10.5g error=%s\n", r.epsilon, r.h,
                r.error ? format_float(*r.error).c_str() : "diverged");
    ok = ok && r.error.has_value();
  }
  Manifest m = base_manifest(args);
  m.set("records", static_cast<int>(all.size()));
  m.write(dir + "/manifest.txt");
  return ok ? 0 : 2;
}

int run_waiting_time(const Args& args) {
  const double eps = args.num("eps", 1e-6);
  const int p = args.integer("p", 5);
  const double threshold = args.num("threshold", 0.01);
  const std::vector<double> schedule = args.list("eps-schedule", {1e-2, 1e-4, eps});

  const WaitingTimeResult wt = waiting_time_experiment(eps, p, threshold, schedule);
  const std::string dir = out_dir(args);
  CsvFile csv(dir + "/interface.csv", "t,value");
  for (size_t k = 0; k < wt.times.size(); ++k)
    csv.row({format_float(wt.times[k]), format_float(wt.interface_values[k])});

  Manifest m = base_manifest(args);
  m.set("converged", wt.solved.report.converged);
  m.set("epsilon_used", wt.solved.report.epsilon_used);
  m.set("expected_waiting_time", 1.0 / 12.0);
  if (wt.crossing) m.set("first_crossing", *wt.crossing);
  m.set("wall_time_s", wt.solved.report.wall_time_s);
  m.write(dir + "/manifest.txt");

  if (!wt.solved.report.converged) return 2;
  std::printf("first crossing of %g at t = %s (expected waiting time %.6f)\n", threshold,
              wt.crossing ? format_float(*wt.crossing).c_str() : "> T", 1.0 / 12.0);
  return 0;
}

int run_heat_adaptive(const Args& args) {
  AdaptiveOptions opts;
  opts.p = args.integer("p", 1);
  opts.theta = args.num("theta", 0.5);
  opts.max_levels = args.integer("levels", 25);
  opts.target_error = args.num("target-error", 0.0);
  opts.base_mesh = mesh_spec_from(args, false);
  if (opts.base_mesh.cartesian) {
    std::fprintf(stderr, "adaptive refinement requires a simplicial mesh\n");
    return 1;
  }
  const auto records = heat_adaptive_experiment(opts);
  const std::string dir = out_dir(args);
  CsvFile csv(dir + "/indicators.csv", "level,ndof,error");
  for (const auto& r : records) {
    csv.row({std::to_string(r.level), std::to_string(r.dofs), format_float(r.error)});
    std::printf("level=%-3d elements=%-6d dofs=%-6d error=%.5g\n", r.level, r.elements, r.dofs,
                r.error);
  }
  Manifest m = base_manifest(args);
  m.set("levels_run", static_cast<int>(records.size()));
  m.write(dir + "/manifest.txt");
  return 0;
}

int run_fisher_jump(const Args& args) {
  const double t_final = args.num("t-final", 8.0);
  const double eps = args.num("eps", 1e-8);
  const FisherJumpRun run = fisher_jump_experiment(2.0, t_final, eps);
  if (!run.slabs.completed) return 2;

  std::vector<double> times;
  for (double t = 0.0; t <= t_final + 1e-12; t += 0.4) times.push_back(std::min(t, t_final));
  const auto fields = run.fields();
  const ProbeSeries avg = probe_average_series(fields, run.system.entropy, 0.0, 1.0, times);
  const EntropySeries entropy =
      entropy_series(fields, run.system.entropy, run.system.entropy, times);

  const std::string dir = out_dir(args);
  CsvFile species(dir + "/species.csv", "t,rho_1");
  for (size_t k = 0; k < times.size(); ++k)
    species.row({format_float(times[k]), format_float(avg.values[k][0])});
  write_entropy_csv(dir + "/entropy.csv", entropy);

  Manifest m = base_manifest(args);
  m.set("slabs", static_cast<int>(run.slabs.reports.size()));
  m.write(dir + "/manifest.txt");
  std::printf("domain average rho: %.4f -> %.4f over %zu samples\n", avg.values.front()[0],
              avg.values.back()[0], times.size());
  return 0;
}

int run_fisher_entropy_compare(const Args& args) {
  const double t_final = args.num("t-final", 40.0);
  const double eps = args.num("eps", 1e-8);
  const FisherEntropyCompareResult cmp = fisher_entropy_compare(t_final, eps);
  if (!cmp.run_n2.slabs.completed || !cmp.run_n21.slabs.completed) return 2;

  const std::string dir = out_dir(args);
  write_entropy_csv(dir + "/entropy_n2.csv", cmp.series_n2);
  write_entropy_csv(dir + "/entropy_n21.csv", cmp.series_n21);
  write_entropy_csv(dir + "/entropy_boltzmann.csv", cmp.series_boltzmann);

  Manifest m = base_manifest(args);
  m.set("entropy_n2_final", cmp.series_n2.entropy.back());
  m.set("entropy_n21_final", cmp.series_n21.entropy.back());
  m.write(dir + "/manifest.txt");
  std::printf("E_n2(T)=%.4g  E_n2.1(T)=%.4g  E_boltzmann(T)=%.4g\n", cmp.series_n2.entropy.back(),
              cmp.series_n21.entropy.back(), cmp.series_boltzmann.entropy.back());
  return 0;
}

int run_duncan_toor(const Args& args) {
  const double eps = args.num("eps", 1e-10);
  const int p = args.integer("p", 2);
  const double slab_dt = args.num("slab-dt", 20.8);
  const int slabs = args.integer("slabs", 36);

  const DuncanToorResult dt = duncan_toor_experiment(p, eps, slab_dt, slabs);
  const std::string dir = out_dir(args);
  Manifest m = base_manifest(args);
  m.set("completed", dt.completed);
  m.set("slabs_solved", static_cast<int>(dt.slabs.reports.size()));
  if (!dt.completed) {
    m.write(dir + "/manifest.txt");
    return 2;
  }
  CsvFile species(dir + "/species.csv", "t,rho_1,rho_2");
  for (size_t k = 0; k < dt.times.size(); ++k)
    species.row({format_float(dt.times[k]), format_float(dt.hydrogen_left[k]),
                 format_float(dt.nitrogen_left[k])});
  write_entropy_csv(dir + "/entropy.csv", dt.relative_entropy);

  double n_min = 1e300;
  for (double v : dt.nitrogen_left) n_min = std::min(n_min, v);
  m.set("nitrogen_left_min", n_min);
  m.set("equilibrium_rho1", dt.equilibrium[0]);
  m.set("equilibrium_rho2", dt.equilibrium[1]);
  m.write(dir + "/manifest.txt");
  std::printf("nitrogen left-half average dips to %.4f (initial 0.501, equilibrium 0.500)\n",
              n_min);
  return 0;
}

int run_ms_implicit(const Args& args) {
  const MixedCrosscheckResult mc =
      mixed_heat_crosscheck(args.integer("nx", 8), args.integer("nt", 8), args.integer("p", 2));
  const std::string dir = out_dir(args);
  Manifest m = base_manifest(args);
  m.set("primal_converged", mc.primal.report.converged);
  m.set("mixed_converged", mc.mixed.report.converged);
  m.set("l2_difference", mc.l2_difference);
  m.write(dir + "/manifest.txt");
  if (!mc.primal.report.converged || !mc.mixed.report.converged) return 2;
  std::printf("L2(Q_T) distance between primal and implicit-current solutions: %.6g\n",
              mc.l2_difference);
  return 0;
}

int run_ms_open(const Args& args) {
  const MsOpenResult os =
      ms_open_experiment(args.integer("nx", 20), args.integer("nt", 20), args.integer("p", 2));
  const std::string dir = out_dir(args);
  Manifest m = base_manifest(args);
  m.set("converged", os.solved.report.converged);
  if (!os.solved.report.converged) {
    m.write(dir + "/manifest.txt");
    return 2;
  }
  CsvFile species(dir + "/species.csv", "t,rho_1,rho_2");
  CsvFile entropy(dir + "/entropy.csv", "t,entropy,dissipation");
  for (size_t k = 0; k < os.times.size(); ++k) {
    species.row({format_float(os.times[k]), format_float(os.midpoint[k][0]),
                 format_float(os.midpoint[k][1])});
    const double diss =
        k + 1 < os.times.size()
            ? (os.relative_entropy[k + 1] - os.relative_entropy[k]) /
                  (os.times[k + 1] - os.times[k])
            : 0.0;
    entropy.row({format_float(os.times[k]), format_float(os.relative_entropy[k]),
                 format_float(diss)});
  }
  m.set("relative_entropy_final", os.relative_entropy.back());
  m.write(dir + "/manifest.txt");
  std::printf("midpoint mixture at T: rho_1=%.4f rho_2=%.4f ; relative entropy %.4g\n",
              os.midpoint.back()[0], os.midpoint.back()[1], os.relative_entropy.back());
  return 0;
}

int run_verify_hypotheses(const Args& args) {
  const int samples = args.integer("samples", 10000);
  const std::string dir = out_dir(args);
  Manifest m = base_manifest(args);
  bool all_pass = true;
  std::printf("%-16s %14s %14s %6s\n", "system", "gamma_observed", "cf_observed", "pass");
  for (const CrossDiffusionSystem& sys :
       {heat(), porous_medium(2.0), fisher_kpp(1.0, 2.0), duncan_toor_system()}) {
    const HypothesisReport rep = verify_hypotheses(sys, samples);
    std::printf("%-16s %14.6g %14.6g %6s\n", sys.name.c_str(), rep.gamma_observed,
                rep.cf_observed, rep.pass ? "yes" : "NO");
    m.set(sys.name + ".gamma_observed", rep.gamma_observed);
    m.set(sys.name + ".cf_observed", rep.cf_observed);
    m.set(sys.name + ".pass", rep.pass);
    all_pass = all_pass && rep.pass;
  }
  m.write(dir + "/manifest.txt");
  return all_pass ? 0 : 2;
}

int run_selftest(const Args& args) {
  (void)args;
  int failures = 0;
  auto check = [&](bool ok, const char* what) {
    std::printf("  %s %s\n", ok ? "[ok]  " : "[FAIL]", what);
    if (!ok) ++failures;
  };

  {  // entropy round trips
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const EntropyDensity ent = EntropyDensity::logistic(2);
    double worst = 0.0;
    int done = 0;
    while (done < 500) {
      StateVec rho(2);
      rho << 0.02 + 0.47 * u01(rng), 0.02 + 0.47 * u01(rng);
      if (rho.sum() >= 0.98) continue;
      ++done;
      worst = std::max(worst, (ent.u(ent.grad_s(rho)) - rho).cwiseAbs().maxCoeff());
    }
    check(worst < 1e-12, "entropy round trip u(s'(rho)) = rho");
  }
  {  // inverse identity
    const auto coeffs = duncan_toor_coefficients();
    double worst = 0.0;
    for (const StateVec& rho : halton_domain_samples(EntropyDensity::logistic(2), 200, 1e-14)) {
      const StateMat prod = -ms_matrix_M(coeffs, rho) * ms_explicit_A2(coeffs, rho[0], rho[1]);
      worst = std::max(worst, StateMat(prod - StateMat::Identity(2, 2)).cwiseAbs().maxCoeff());
    }
    check(worst < 1e-12, "-M A = I on Halton samples");
  }
  {  // Jacobian finite differences, primal + mixed, Duncan-Toor system
    const SpaceTimeMesh mesh = build_cartesian(0.0, 1.0, 1.0, 2, 2);
    const CrossDiffusionSystem sys = duncan_toor_system();
    std::mt19937 rng(5);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const Formulation form : {Formulation::Primal, Formulation::MixedImplicitCurrent}) {
      const FeSpace space = build_space(mesh, 2, 2);
      const FeSpace current = build_space(mesh, 2, 2);
      ResidualContext ctx;
      ctx.space = &space;
      ctx.current_space = form == Formulation::MixedImplicitCurrent ? &current : nullptr;
      ctx.system = &sys;
      ctx.config.formulation = form;
      ctx.config.epsilon = 1e-3;
      ctx.rho0 = [](double) { return StateVec(StateVec::Constant(2, 0.25)); };
      Vector w = Vector::Zero(ctx.total_dofs());
      for (int i = 0; i < w.size(); ++i) w[i] = 0.2 * normal(rng) - 0.5;
      Vector residual;
      SparseMatrix jac;
      assemble(ctx, w, &residual, &jac);
      double worst = 0.0;
      for (int d = 0; d < 10; ++d) {
        Vector v(w.size());
        for (int i = 0; i < v.size(); ++i) v[i] = normal(rng);
        v /= v.norm();
        Vector rp, rm;
        assemble(ctx, w + 1e-6 * v, &rp, nullptr);
        assemble(ctx, w - 1e-6 * v, &rm, nullptr);
        worst = std::max(worst, ((jac * v) - (rp - rm) / 2e-6).norm() /
                                    std::max((jac * v).norm(), 1e-12));
      }
      check(worst < 1e-6, form == Formulation::Primal ? "primal Jacobian finite differences"
                                                      : "mixed Jacobian finite differences");
    }
  }
  {  // mass balance and ledger for a closed solve
    const ManufacturedProblem prob = heat_manufactured();
    MeshSpec spec;
    spec.cartesian = true;
    spec.nx = 8;
    spec.nt = 8;
    const SolvedProblem s = solve_manufactured(prob, spec, 2, 0.0);
    check(s.report.converged, "heat solve converged");
    if (s.report.converged) {
      double mass_final = 0.0, mass_initial = 0.0;
      for (const TracePoint& tp : trace_quadrature(*s.space, FacetTag::FinalTime)) {
        const FieldValue fv =
            evaluate_field(*s.space, s.report.coefficients, tp.element, tp.xi, tp.eta);
        mass_final += tp.weight * s.system.entropy.u(fv.value)[0];
      }
      for (const TracePoint& tp : trace_quadrature(*s.space, FacetTag::InitialTime))
        mass_initial += tp.weight * s.rho0(tp.x)[0];
      check(std::abs(mass_final - mass_initial) <= 1e-10, "discrete mass balance at eps = 0");
      check(ledger_satisfied(s.report.ledger), "entropy ledger");
      check(s.report.audit.violations == 0, "boundedness at quadrature points");
    }
  }
  std::printf("selftest: %s\n", failures == 0 ? "all checks passed" : "FAILURES");
  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fputs(kUsage, stderr);
    return 1;
  }
  Args args;
  args.subcommand = argv[1];
  for (int a = 2; a < argc; ++a) {
    const std::string key = argv[a];
    if (key.rfind("--", 0) != 0 || a + 1 >= argc) {
      std::fprintf(stderr, "expected --key value pairs, got '%s'\n%s", key.c_str(), kUsage);
      return 1;
    }
    args.flags[key.substr(2)] = argv[++a];
  }

  const auto started = std::chrono::steady_clock::now();
  int code = 1;
  try {
    if (args.subcommand == "heat-convergence")
      code = run_convergence(args, heat_manufactured());
    else if (args.subcommand == "porous-convergence")
      code = run_convergence(args, porous_manufactured());
    else if (args.subcommand == "fisher-convergence")
      code = run_convergence(args, fisher_manufactured());
    else if (args.subcommand == "porous-eps-sweep")
      code = run_eps_sweep(args);
    else if (args.subcommand == "porous-waiting-time")
      code = run_waiting_time(args);
    else if (args.subcommand == "heat-adaptive")
      code = run_heat_adaptive(args);
    else if (args.subcommand == "fisher-jump")
      code = run_fisher_jump(args);
    else if (args.subcommand == "fisher-entropy-compare")
      code = run_fisher_entropy_compare(args);
    else if (args.subcommand == "ms-duncan-toor-1d")
      code = run_duncan_toor(args);
    else if (args.subcommand == "ms-implicit-1d")
      code = run_ms_implicit(args);
    else if (args.subcommand == "ms-open-1d")
      code = run_ms_open(args);
    else if (args.subcommand == "verify-hypotheses")
      code = run_verify_hypotheses(args);
    else if (args.subcommand == "selftest")
      code = run_selftest(args);
    else {
      std::fprintf(stderr, "unknown subcommand '%s'\n%s", args.subcommand.c_str(), kUsage);
      return 1;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  std::fprintf(stderr, "[%s finished in %.1f s]\n", args.subcommand.c_str(),
               std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  return code;
}
