#include "crossdiff/models.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace crossdiff {

MaxwellStefanCoefficients make_ms_coefficients(const std::vector<std::vector<double>>& D) {
  const int s = static_cast<int>(D.size());
  if (s < 2 || s > kMaxComponents + 1) throw std::invalid_argument("need 2..5 species");
  MaxwellStefanCoefficients c;
  c.D.resize(s, s);
  for (int i = 0; i < s; ++i) {
    if (static_cast<int>(D[i].size()) != s) throw std::invalid_argument("square matrix required");
    for (int j = 0; j < s; ++j) {
      if (i != j && !(D[i][j] > 0.0))
        throw std::invalid_argument("off-diagonal diffusion coefficients must be positive");
      if (std::abs(D[i][j] - D[j][i]) > 1e-12 * std::abs(D[i][j]))
        throw std::invalid_argument("diffusion coefficients must be symmetric");
      c.D(i, j) = D[i][j] == 0.0 ? 1.0 : D[i][j];  // diagonal placeholder; cancels in M
    }
  }
  return c;
}

MaxwellStefanCoefficients duncan_toor_coefficients() {
  // Hydrogen (1), nitrogen (2), carbon dioxide (3); mm^2/s.
  return make_ms_coefficients({{0.0, 83.3, 68.0}, {83.3, 0.0, 16.8}, {68.0, 16.8, 0.0}});
}

StateMat ms_matrix_M(const MaxwellStefanCoefficients& coeffs, const StateVec& rho) {
  const int n = coeffs.reduced_components();
  double buf[kMaxComponents * kMaxComponents];
  ms_matrix_M_generic(coeffs, rho.data(), buf);
  StateMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = buf[i * n + j];
  return m;
}

StateMat ms_explicit_A2(const MaxwellStefanCoefficients& coeffs, double rho1, double rho2) {
  if (coeffs.reduced_components() != 2) throw std::invalid_argument("N=2 coefficients required");
  double buf[4];
  const double rho[2] = {rho1, rho2};
  ms_explicit_A2_generic(coeffs, rho, buf);
  StateMat a(2, 2);
  a(0, 0) = buf[0];
  a(0, 1) = buf[1];
  a(1, 0) = buf[2];
  a(1, 1) = buf[3];
  return a;
}

StateMat CrossDiffusionSystem::diffusion(const StateVec& rho) const {
  StateMat a(components, components);
  switch (kind) {
    case Kind::ConstantDiffusion:
      a(0, 0) = kappa;
      break;
    case Kind::PorousMedium:
      a(0, 0) = exponent * std::pow(rho[0], exponent - 1.0);
      break;
    case Kind::FisherKpp:
      a(0, 0) = fisher_a;
      break;
    case Kind::MaxwellStefan:
      if (components == 1)
        a(0, 0) = ms->D(0, 1);
      else
        a = ms_explicit_A2(*ms, rho[0], rho[1]);
      break;
  }
  return a;
}

StateMat CrossDiffusionSystem::diffusion_derivative(const StateVec& rho, int k) const {
  StateMat d = StateMat::Zero(components, components);
  switch (kind) {
    case Kind::ConstantDiffusion:
    case Kind::FisherKpp:
      break;
    case Kind::PorousMedium:
      d(0, 0) = exponent * (exponent - 1.0) * std::pow(rho[0], exponent - 2.0);
      break;
    case Kind::MaxwellStefan:
      throw std::logic_error("no closed-form dA for Maxwell-Stefan; use the dual path");
  }
  (void)k;
  return d;
}

StateVec CrossDiffusionSystem::reaction(const StateVec& rho) const {
  StateVec f = StateVec::Zero(components);
  if (kind == Kind::FisherKpp) f[0] = rho[0] * (1.0 - rho[0]);
  return f;
}

StateMat CrossDiffusionSystem::reaction_jacobian(const StateVec& rho) const {
  StateMat df = StateMat::Zero(components, components);
  if (kind == Kind::FisherKpp) df(0, 0) = 1.0 - 2.0 * rho[0];
  return df;
}

StateMat CrossDiffusionSystem::mixed_M(const StateVec& rho) const {
  if (kind == Kind::MaxwellStefan) return ms_matrix_M(*ms, rho);
  StateMat m(1, 1);
  m(0, 0) = -1.0 / diffusion(rho)(0, 0);
  return m;
}

namespace {

double fisher_gamma(double a_const, double n) {
  // Minimize a * s''(rho) = a * n / (rho (n - rho)) over (0,1) by golden section.
  const double lo = kDomainMargin, hi = 1.0 - kDomainMargin;
  auto f = [&](double r) { return a_const * n / (r * (n - r)); };
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  for (int it = 0; it < 200; ++it) {
    if (f(c) < f(d))
      b = d;
    else
      a = c;
    c = b - phi * (b - a);
    d = a + phi * (b - a);
  }
  return f(0.5 * (a + b));
}

}  // namespace

CrossDiffusionSystem heat() { return scaled_heat(1.0); }

CrossDiffusionSystem scaled_heat(double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("diffusion constant must be positive");
  CrossDiffusionSystem s;
  s.kind = CrossDiffusionSystem::Kind::ConstantDiffusion;
  s.components = 1;
  s.entropy = EntropyDensity::logistic(1);
  s.kappa = kappa;
  s.gamma = 4.0 * kappa;
  s.c_f = 0.0;
  s.name = kappa == 1.0 ? "heat" : "heat(kappa=" + std::to_string(kappa) + ")";
  return s;
}

CrossDiffusionSystem porous_medium(double m) {
  if (!(m > 1.0 && m <= 2.0))
    throw std::invalid_argument("porous medium hypothesis requires m in (1,2]");
  CrossDiffusionSystem s;
  s.kind = CrossDiffusionSystem::Kind::PorousMedium;
  s.components = 1;
  s.entropy = EntropyDensity::logistic(1);
  s.exponent = m;
  s.gamma = m;
  s.c_f = 0.0;
  s.name = "porous-medium";
  return s;
}

CrossDiffusionSystem fisher_kpp(double a_const, double n) {
  if (!(a_const > 0.0)) throw std::invalid_argument("diffusion constant must be positive");
  if (!(n >= 2.0))
    throw std::invalid_argument("reaction bound requires n >= 2 for the rescaled entropy");
  CrossDiffusionSystem s;
  s.kind = CrossDiffusionSystem::Kind::FisherKpp;
  s.components = 1;
  s.entropy = EntropyDensity::scaled_log(n);
  s.fisher_a = a_const;
  s.gamma = fisher_gamma(a_const, n);
  s.c_f = 0.0;
  s.name = "fisher-kpp";
  return s;
}

CrossDiffusionSystem maxwell_stefan_system(const MaxwellStefanCoefficients& coeffs) {
  const int n = coeffs.reduced_components();
  if (n < 1 || n > 2) throw std::invalid_argument("explicit Maxwell-Stefan supports N = 1 or 2");
  CrossDiffusionSystem s;
  s.kind = CrossDiffusionSystem::Kind::MaxwellStefan;
  s.components = n;
  s.entropy = EntropyDensity::logistic(n);
  s.ms = coeffs;
  s.c_f = 0.0;
  s.name = "maxwell-stefan";
  // The coercivity constant is not known in closed form; report the sampled
  // value (used only for the entropy ledger, never inside the scheme).
  s.gamma = 1.0;
  s.gamma = verify_hypotheses(s, 4096).gamma_observed;
  return s;
}

CrossDiffusionSystem duncan_toor_system() {
  CrossDiffusionSystem s = maxwell_stefan_system(duncan_toor_coefficients());
  s.name = "duncan-toor";
  return s;
}

std::vector<StateVec> halton_domain_samples(const EntropyDensity& entropy, int count,
                                            double margin) {
  static const int bases[] = {2, 3, 5, 7};
  auto halton = [](int index, int base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
      f /= base;
      r += f * (index % base);
      index /= base;
    }
    return r;
  };
  std::vector<StateVec> samples;
  samples.reserve(count);
  int index = 1;
  while (static_cast<int>(samples.size()) < count) {
    StateVec rho(entropy.components);
    for (int c = 0; c < entropy.components; ++c) rho[c] = halton(index, bases[c]);
    ++index;
    if (entropy.domain_contains(rho, std::max(margin, 1e-6))) samples.push_back(rho);
    if (index > 1000 * count) throw std::logic_error("domain sampling failed");
  }
  return samples;
}

HypothesisReport verify_hypotheses(const CrossDiffusionSystem& system, int sample_count) {
  if (sample_count < 1) throw std::invalid_argument("sample count must be >= 1");
  HypothesisReport report;
  report.gamma_observed = 1e300;
  report.cf_observed = -1e300;
  const auto samples = halton_domain_samples(system.entropy, sample_count, kDomainMargin);
  for (const StateVec& rho : samples) {
    const StateMat prod = system.entropy.hess_s(rho) * system.diffusion(rho);
    const Eigen::MatrixXd sym = 0.5 * (Eigen::MatrixXd(prod) + Eigen::MatrixXd(prod).transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    report.gamma_observed = std::min(report.gamma_observed, eig.eigenvalues().minCoeff());
    report.cf_observed =
        std::max(report.cf_observed, system.reaction(rho).dot(system.entropy.grad_s(rho)));
  }
  report.pass = report.gamma_observed > 0.0 && report.cf_observed <= system.c_f + 1e-12;
  return report;
}

}  // namespace crossdiff
