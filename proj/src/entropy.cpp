#include "crossdiff/entropy.hpp"

#include <algorithm>
#include <stdexcept>

namespace crossdiff {

namespace {

// Saturation bounds keeping u strictly inside its image set in floating point.
constexpr double kFloor = 1e-300;
constexpr double kSumCap = 1.0 - 4.0 * 2.220446049250313e-16;

double clamped_log(double a) {
  if (a < -kDomainMargin) throw std::domain_error("entropy argument outside the admissible set");
  return std::log(std::max(a, kDomainMargin));
}

// a*log(a) with the 0*log(0) = 0 convention.
double xlogx(double a) {
  if (a < -kDomainMargin) throw std::domain_error("entropy argument outside the admissible set");
  if (a <= kDomainMargin) return 0.0;
  return a * std::log(a);
}

}  // namespace

EntropyDensity EntropyDensity::logistic(int n_components) {
  if (n_components < 1 || n_components > kMaxComponents)
    throw std::invalid_argument("unsupported component count");
  EntropyDensity e;
  e.family = Family::Logistic;
  e.components = n_components;
  return e;
}

EntropyDensity EntropyDensity::scaled_log(double n) {
  if (!(n > 0.0)) throw std::invalid_argument("scale parameter must be positive");
  EntropyDensity e;
  e.family = Family::ScaledLog;
  e.components = 1;
  e.n = n;
  return e;
}

EntropyDensity EntropyDensity::boltzmann() {
  EntropyDensity e;
  e.family = Family::Boltzmann;
  e.components = 1;
  return e;
}

EntropyDensity EntropyDensity::quadratic(int n_components) {
  if (n_components < 1 || n_components > kMaxComponents)
    throw std::invalid_argument("unsupported component count");
  EntropyDensity e;
  e.family = Family::Quadratic;
  e.components = n_components;
  return e;
}

double EntropyDensity::s(const StateVec& rho) const {
  switch (family) {
    case Family::Logistic: {
      double acc = std::log(static_cast<double>(components + 1));
      double last = 1.0;
      for (int i = 0; i < components; ++i) {
        acc += xlogx(rho[i]);
        last -= rho[i];
      }
      acc += xlogx(last);
      return acc;
    }
    case Family::ScaledLog:
      return xlogx(rho[0]) + xlogx(n - rho[0]);
    case Family::Boltzmann:
      return xlogx(rho[0]) - rho[0] + 1.0;
    case Family::Quadratic:
      return 0.5 * rho.squaredNorm();
  }
  return 0.0;
}

StateVec EntropyDensity::grad_s(const StateVec& rho) const {
  StateVec g(components);
  switch (family) {
    case Family::Logistic: {
      double last = 1.0;
      for (int i = 0; i < components; ++i) last -= rho[i];
      const double log_last = clamped_log(last);
      for (int i = 0; i < components; ++i) g[i] = clamped_log(rho[i]) - log_last;
      break;
    }
    case Family::ScaledLog:
      g[0] = clamped_log(rho[0]) - clamped_log(n - rho[0]);
      break;
    case Family::Boltzmann:
      g[0] = clamped_log(rho[0]);
      break;
    case Family::Quadratic:
      g = rho;
      break;
  }
  return g;
}

StateMat EntropyDensity::hess_s(const StateVec& rho) const {
  StateMat h(components, components);
  switch (family) {
    case Family::Logistic: {
      double last = 1.0;
      for (int i = 0; i < components; ++i) last -= rho[i];
      const double inv_last = 1.0 / std::max(last, kDomainMargin);
      for (int k = 0; k < components; ++k)
        for (int l = 0; l < components; ++l)
          h(k, l) = inv_last + (k == l ? 1.0 / std::max(rho[k], kDomainMargin) : 0.0);
      break;
    }
    case Family::ScaledLog:
      h(0, 0) = 1.0 / std::max(rho[0], kDomainMargin) + 1.0 / std::max(n - rho[0], kDomainMargin);
      break;
    case Family::Boltzmann:
      h(0, 0) = 1.0 / std::max(rho[0], kDomainMargin);
      break;
    case Family::Quadratic:
      h.setIdentity(components, components);
      break;
  }
  return h;
}

StateVec EntropyDensity::u(const StateVec& w) const {
  for (int i = 0; i < components; ++i)
    if (!std::isfinite(w[i])) throw NumericError("non-finite entropy variable");
  StateVec out(components);
  switch (family) {
    case Family::Logistic: {
      u_generic(w.data(), out.data());
      double sum = 0.0;
      for (int i = 0; i < components; ++i) {
        out[i] = std::max(out[i], kFloor);
        sum += out[i];
      }
      if (sum > kSumCap)
        for (int i = 0; i < components; ++i) out[i] *= kSumCap / sum;
      break;
    }
    case Family::ScaledLog: {
      u_generic(w.data(), out.data());
      out[0] = std::clamp(out[0], n * kFloor, n * kSumCap);
      break;
    }
    case Family::Boltzmann:
      out[0] = std::max(std::exp(w[0]), kFloor);
      break;
    case Family::Quadratic:
      out = w;
      break;
  }
  return out;
}

StateMat EntropyDensity::jac_u(const StateVec& w) const { return jac_u_from_value(u(w)); }

StateMat EntropyDensity::jac_u_from_value(const StateVec& u_value) const {
  StateMat j(components, components);
  double buf[kMaxComponents * kMaxComponents];
  jac_u_from_value_generic(u_value.data(), buf);
  for (int k = 0; k < components; ++k)
    for (int l = 0; l < components; ++l) j(k, l) = buf[k * components + l];
  return j;
}

double EntropyDensity::jac_u_derivative_1d(double u_value) const {
  switch (family) {
    case Family::Logistic:
      return u_value * (1.0 - u_value) * (1.0 - 2.0 * u_value);
    case Family::ScaledLog:
      return u_value * (n - u_value) / n * (n - 2.0 * u_value) / n;
    case Family::Boltzmann:
      return u_value;
    case Family::Quadratic:
      return 0.0;
  }
  return 0.0;
}

double EntropyDensity::relative_entropy(const StateVec& rho, const StateVec& g) const {
  return s(rho) - s(g) - grad_s(g).dot(rho - g);
}

bool EntropyDensity::domain_contains(const StateVec& rho, double margin) const {
  switch (family) {
    case Family::Logistic: {
      double sum = 0.0;
      for (int i = 0; i < components; ++i) {
        if (!(rho[i] > margin)) return false;
        sum += rho[i];
      }
      return sum < 1.0 - margin;
    }
    case Family::ScaledLog:
      return rho[0] > margin && rho[0] < 1.0 - margin;
    case Family::Boltzmann:
      return rho[0] > margin;
    case Family::Quadratic:
      return rho.allFinite();
  }
  return false;
}

bool EntropyDensity::range_contains(const StateVec& rho) const {
  switch (family) {
    case Family::Logistic: {
      double sum = 0.0;
      for (int i = 0; i < components; ++i) {
        if (!(rho[i] > 0.0 && rho[i] < 1.0)) return false;
        sum += rho[i];
      }
      return sum < 1.0;
    }
    case Family::ScaledLog:
      return rho[0] > 0.0 && rho[0] < n;
    case Family::Boltzmann:
      return rho[0] > 0.0;
    case Family::Quadratic:
      return rho.allFinite();
  }
  return false;
}

StateVec EntropyDensity::clamp_into_domain(const StateVec& rho, double delta) const {
  StateVec out = rho;
  switch (family) {
    case Family::Logistic: {
      double sum = 0.0;
      for (int i = 0; i < components; ++i) {
        out[i] = std::max(out[i], delta);
        sum += out[i];
      }
      if (sum >= 1.0 - delta)
        for (int i = 0; i < components; ++i) out[i] *= (1.0 - delta) / sum;
      break;
    }
    case Family::ScaledLog:
      out[0] = std::clamp(out[0], delta, n - delta);
      break;
    case Family::Boltzmann:
      out[0] = std::max(out[0], delta);
      break;
    case Family::Quadratic:
      break;
  }
  return out;
}

}  // namespace crossdiff
