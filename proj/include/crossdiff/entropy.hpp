#pragma once

#include <cmath>

#include "crossdiff/dual.hpp"
#include "crossdiff/types.hpp"

namespace crossdiff {

// Log arguments are clamped at this margin; beyond it (negative arguments)
// the evaluation is a domain error. Initial-data entropies then follow the
// 0*log(0) = 0 convention.
constexpr double kDomainMargin = 1e-14;

// Convex entropy density s with gradient, Hessian, the inverse map
// u = (s')^{-1} and its Jacobian. u is evaluated overflow-safely and
// saturated so that its image stays strictly inside the admissible set in
// floating point, which is what makes the scheme bounded by construction.
struct EntropyDensity {
  enum class Family { Logistic, ScaledLog, Boltzmann, Quadratic };

  Family family{Family::Logistic};
  int components{1};
  double n{1.0};  // ScaledLog scale parameter

  static EntropyDensity logistic(int n_components);
  static EntropyDensity scaled_log(double n);
  static EntropyDensity boltzmann();
  // Identity transform u(w) = w; linear debug mode, not an admissible entropy.
  static EntropyDensity quadratic(int n_components);

  double s(const StateVec& rho) const;
  StateVec grad_s(const StateVec& rho) const;
  StateMat hess_s(const StateVec& rho) const;
  StateVec u(const StateVec& w) const;
  StateMat jac_u(const StateVec& w) const;

  // s^inf(rho|g) = s(rho) - s(g) - s'(g).(rho - g)
  double relative_entropy(const StateVec& rho, const StateVec& g) const;

  // Strict interior of the hypothesis domain D with the given margin.
  bool domain_contains(const StateVec& rho, double margin) const;
  // Strict interior of the image of u (the set preserved by construction).
  bool range_contains(const StateVec& rho) const;

  // Pulls boundary data into the domain of s' (used by initial guesses).
  StateVec clamp_into_domain(const StateVec& rho, double delta) const;

  // jac_u expressed through an already computed u value.
  StateMat jac_u_from_value(const StateVec& u_value) const;
  // N=1 families: d(jac_u)/dw expressed through the u value.
  double jac_u_derivative_1d(double u_value) const;

  // Scalar-generic paths for dual-number differentiation. Arrays are sized
  // by `components` (row-major for matrices).
  template <class T>
  void u_generic(const T* w, T* out) const;
  template <class T>
  void hess_generic(const T* rho, T* out) const;
  template <class T>
  void jac_u_from_value_generic(const T* u_value, T* out) const;
};

template <class T>
void EntropyDensity::u_generic(const T* w, T* out) const {
  using std::exp;
  switch (family) {
    case Family::Logistic: {
      double m = 0.0;
      for (int i = 0; i < components; ++i) m = std::max(m, value(w[i]));
      T denom = exp(T(-m));
      for (int i = 0; i < components; ++i) denom += exp(w[i] - T(m));
      for (int i = 0; i < components; ++i) out[i] = exp(w[i] - T(m)) / denom;
      break;
    }
    case Family::ScaledLog: {
      const double wv = value(w[0]);
      if (wv >= 0.0) {
        out[0] = T(n) / (T(1.0) + exp(-w[0]));
      } else {
        const T e = exp(w[0]);
        out[0] = T(n) * e / (T(1.0) + e);
      }
      break;
    }
    case Family::Boltzmann:
      out[0] = exp(w[0]);
      break;
    case Family::Quadratic:
      for (int i = 0; i < components; ++i) out[i] = w[i];
      break;
  }
}

template <class T>
void EntropyDensity::jac_u_from_value_generic(const T* u_value, T* out) const {
  switch (family) {
    case Family::Logistic:
      for (int k = 0; k < components; ++k)
        for (int l = 0; l < components; ++l) {
          T v = -u_value[k] * u_value[l];
          if (k == l) v += u_value[k];
          out[k * components + l] = v;
        }
      break;
    case Family::ScaledLog:
      out[0] = u_value[0] * (T(n) - u_value[0]) / T(n);
      break;
    case Family::Boltzmann:
      out[0] = u_value[0];
      break;
    case Family::Quadratic:
      for (int k = 0; k < components; ++k)
        for (int l = 0; l < components; ++l) out[k * components + l] = T(k == l ? 1.0 : 0.0);
      break;
  }
}

template <class T>
void EntropyDensity::hess_generic(const T* rho, T* out) const {
  switch (family) {
    case Family::Logistic: {
      T last = T(1.0);
      for (int i = 0; i < components; ++i) last -= rho[i];
      for (int k = 0; k < components; ++k)
        for (int l = 0; l < components; ++l) {
          T v = T(1.0) / last;
          if (k == l) v += T(1.0) / rho[k];
          out[k * components + l] = v;
        }
      break;
    }
    case Family::ScaledLog:
      out[0] = T(1.0) / rho[0] + T(1.0) / (T(n) - rho[0]);
      break;
    case Family::Boltzmann:
      out[0] = T(1.0) / rho[0];
      break;
    case Family::Quadratic:
      for (int k = 0; k < components; ++k)
        for (int l = 0; l < components; ++l) out[k * components + l] = T(k == l ? 1.0 : 0.0);
      break;
  }
}

}  // namespace crossdiff
