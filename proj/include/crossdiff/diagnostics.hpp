#pragma once

#include <optional>
#include <vector>

#include "crossdiff/fe_space.hpp"
#include "crossdiff/models.hpp"

namespace crossdiff {

struct ConvergenceRecord {
  double h{0.0};
  int p{0};
  double epsilon{0.0};
  std::optional<double> error;  // empty: solve did not converge
  std::optional<double> rate;   // log2 ratio against the next-coarser level
  int dofs{0};
  int newton_iterations{0};
};

struct EntropySeries {
  std::vector<double> times;
  std::vector<double> entropy;
  std::vector<double> dissipation;  // forward differences; last repeats
};

struct ProbeSeries {
  std::vector<double> times;
  std::vector<StateVec> values;
};

// A solved field on one time slab; a single solve is one entry covering
// the whole cylinder.
struct SlabField {
  const FeSpace* space{nullptr};
  const Vector* coeffs{nullptr};
};

// E(t) = int_Omega s(u(w(t,.))) dx, or the relative entropy against a
// constant reference state. solver_entropy supplies the transform u; entropy
// time series may be evaluated with a different density (eval_entropy).
EntropySeries entropy_series(const std::vector<SlabField>& fields,
                             const EntropyDensity& solver_entropy,
                             const EntropyDensity& eval_entropy,
                             const std::vector<double>& sample_times,
                             const std::optional<StateVec>& reference = std::nullopt);

// Squared jump of the discrete spatial flux across interior edges, weighted
// by the element diameter; the adaptivity indicator.
std::vector<double> flux_error_indicator(const FeSpace& space, const Vector& coeffs,
                                         const CrossDiffusionSystem& system);

// First sample time at which u(w)(x_interface, t) exceeds the threshold on a
// dense time grid; empty when there is no crossing up to T.
std::optional<double> waiting_time_track(const FeSpace& space, const Vector& coeffs,
                                         const EntropyDensity& entropy, double x_interface,
                                         double threshold, int samples = 1000);

ProbeSeries probe_point_series(const std::vector<SlabField>& fields,
                               const EntropyDensity& entropy, double x_probe,
                               const std::vector<double>& sample_times);

ProbeSeries probe_average_series(const std::vector<SlabField>& fields,
                                 const EntropyDensity& entropy, double x_lo, double x_hi,
                                 const std::vector<double>& sample_times);

// Least-squares fit of log(y) = a + b t; returns {slope b, r_squared}.
std::pair<double, double> log_linear_fit(const std::vector<double>& t,
                                         const std::vector<double>& y);

}  // namespace crossdiff
