#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crossdiff/entropy.hpp"
#include "crossdiff/types.hpp"

namespace crossdiff {

// Binary diffusion coefficients D_ij = D_ji > 0 for N+1 species. Diagonal
// entries are stored but cancel out of the M-matrix.
struct MaxwellStefanCoefficients {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxComponents + 1,
                kMaxComponents + 1>
      D;

  int species() const { return static_cast<int>(D.rows()); }
  int reduced_components() const { return species() - 1; }

  // N=2 shorthands: d1 = 1/D13, d2 = 1/D23, d3 = 1/D12.
  double d1() const { return 1.0 / D(0, 2); }
  double d2() const { return 1.0 / D(1, 2); }
  double d3() const { return 1.0 / D(0, 1); }
};

MaxwellStefanCoefficients make_ms_coefficients(const std::vector<std::vector<double>>& D);
MaxwellStefanCoefficients duncan_toor_coefficients();

// Reduced M-matrix of the flux inversion (N x N, N = species-1).
StateMat ms_matrix_M(const MaxwellStefanCoefficients& coeffs, const StateVec& rho);

// Closed-form A = (-M)^{-1} for N=2.
StateMat ms_explicit_A2(const MaxwellStefanCoefficients& coeffs, double rho1, double rho2);

struct CrossDiffusionSystem {
  enum class Kind { ConstantDiffusion, PorousMedium, FisherKpp, MaxwellStefan };

  Kind kind{Kind::ConstantDiffusion};
  int components{1};
  EntropyDensity entropy;
  double gamma{0.0};
  double c_f{0.0};
  std::string name;

  double kappa{1.0};     // ConstantDiffusion
  double exponent{2.0};  // PorousMedium m
  double fisher_a{1.0};  // FisherKpp diffusion constant
  std::optional<MaxwellStefanCoefficients> ms;

  StateMat diffusion(const StateVec& rho) const;
  bool has_closed_dA() const { return kind != Kind::MaxwellStefan; }
  // dA/drho_k; closed form for the scalar systems only.
  StateMat diffusion_derivative(const StateVec& rho, int k) const;
  StateVec reaction(const StateVec& rho) const;
  StateMat reaction_jacobian(const StateVec& rho) const;

  // M with -M A = I; closed form for Maxwell-Stefan, -1/A for scalar systems.
  StateMat mixed_M(const StateVec& rho) const;

  template <class T>
  void diffusion_generic(const T* rho, T* out) const;  // row-major N x N
  template <class T>
  void mixed_M_generic(const T* rho, T* out) const;
};

CrossDiffusionSystem heat();
CrossDiffusionSystem scaled_heat(double kappa);
CrossDiffusionSystem porous_medium(double m);
CrossDiffusionSystem fisher_kpp(double a_const, double n);
CrossDiffusionSystem maxwell_stefan_system(const MaxwellStefanCoefficients& coeffs);
CrossDiffusionSystem duncan_toor_system();

struct HypothesisReport {
  double gamma_observed{0.0};
  double cf_observed{0.0};
  bool pass{false};
};

// Sampled check of the coercivity and reaction-bound hypotheses on
// quasi-random (Halton) points of the admissible set.
HypothesisReport verify_hypotheses(const CrossDiffusionSystem& system, int sample_count);

std::vector<StateVec> halton_domain_samples(const EntropyDensity& entropy, int count,
                                            double margin);

template <class T>
void ms_matrix_M_generic(const MaxwellStefanCoefficients& coeffs, const T* rho, T* out) {
  const int n = coeffs.reduced_components();
  for (int i = 0; i < n; ++i) {
    T diag = T(0.0);
    T sum_rho = T(0.0);
    for (int k = 0; k < n; ++k) {
      diag += rho[k] / T(coeffs.D(i, k));
      sum_rho += rho[k];
    }
    diag += (T(1.0) - sum_rho) / T(coeffs.D(i, n));
    for (int j = 0; j < n; ++j) {
      T v = rho[i] / T(coeffs.D(i, j)) - rho[i] / T(coeffs.D(i, n));
      if (i == j) v = v - diag;
      out[i * n + j] = v;
    }
  }
}

template <class T>
void ms_explicit_A2_generic(const MaxwellStefanCoefficients& coeffs, const T* rho, T* out) {
  const T d1 = T(coeffs.d1()), d2 = T(coeffs.d2()), d3 = T(coeffs.d3());
  const T r1 = rho[0], r2 = rho[1];
  const T det = d1 * d2 * (T(1.0) - r1 - r2) + d3 * (d1 * r1 + d2 * r2);
  out[0] = (d2 + (d3 - d2) * r1) / det;
  out[1] = (d3 - d1) * r1 / det;
  out[2] = (d3 - d2) * r2 / det;
  out[3] = (d1 + (d3 - d1) * r2) / det;
}

template <class T>
void CrossDiffusionSystem::diffusion_generic(const T* rho, T* out) const {
  using std::pow;
  switch (kind) {
    case Kind::ConstantDiffusion:
      out[0] = T(kappa);
      break;
    case Kind::PorousMedium:
      out[0] = T(exponent) * pow(rho[0], exponent - 1.0);
      break;
    case Kind::FisherKpp:
      out[0] = T(fisher_a);
      break;
    case Kind::MaxwellStefan:
      if (components == 1) {
        out[0] = T(ms->D(0, 1));
      } else {
        ms_explicit_A2_generic(*ms, rho, out);
      }
      break;
  }
}

template <class T>
void CrossDiffusionSystem::mixed_M_generic(const T* rho, T* out) const {
  if (kind == Kind::MaxwellStefan) {
    ms_matrix_M_generic(*ms, rho, out);
    return;
  }
  T a[1];
  diffusion_generic(rho, a);
  out[0] = T(-1.0) / a[0];
}

}  // namespace crossdiff
