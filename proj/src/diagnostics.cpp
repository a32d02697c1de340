#include "crossdiff/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace crossdiff {

namespace {

const SlabField& field_at(const std::vector<SlabField>& fields, double t) {
  for (const SlabField& f : fields) {
    const SpaceTimeMesh& mesh = *f.space->mesh;
    const double teps = 1e-12 * std::max(1.0, mesh.t_final);
    if (t >= mesh.t_initial - teps && t <= mesh.t_final + teps) return f;
  }
  throw std::domain_error("sample time outside the solved intervals");
}

}  // namespace

EntropySeries entropy_series(const std::vector<SlabField>& fields,
                             const EntropyDensity& solver_entropy,
                             const EntropyDensity& eval_entropy,
                             const std::vector<double>& sample_times,
                             const std::optional<StateVec>& reference) {
  EntropySeries series;
  series.times = sample_times;
  for (double t : sample_times) {
    const SlabField& f = field_at(fields, t);
    const double t_clamped =
        std::clamp(t, f.space->mesh->t_initial, f.space->mesh->t_final);
    auto integrand = [&](const StateVec& w) {
      const StateVec rho = solver_entropy.u(w);
      if (reference) return eval_entropy.relative_entropy(rho, *reference);
      return eval_entropy.s(rho);
    };
    series.entropy.push_back(time_slice_integral(*f.space, *f.coeffs, t_clamped, integrand));
  }
  const size_t n = series.times.size();
  series.dissipation.resize(n, 0.0);
  for (size_t k = 0; k + 1 < n; ++k)
    series.dissipation[k] =
        (series.entropy[k + 1] - series.entropy[k]) / (series.times[k + 1] - series.times[k]);
  if (n >= 2) series.dissipation[n - 1] = series.dissipation[n - 2];
  return series;
}

std::vector<double> flux_error_indicator(const FeSpace& space, const Vector& coeffs,
                                         const CrossDiffusionSystem& system) {
  const SpaceTimeMesh& mesh = *space.mesh;
  const int N = system.components;

  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> edges;
  for (int e = 0; e < mesh.num_elements(); ++e)
    for (int k = 0; k < mesh.elements[e].nedges(); ++k) {
      auto [a, b] = mesh.edge_vertices(e, k);
      edges[std::minmax(a, b)].push_back({e, k});
    }

  Vector gn, gw;
  gauss_for_degree(2 * space.order, gn, gw);

  std::vector<double> eta2(mesh.num_elements(), 0.0);
  for (const auto& [verts, incident] : edges) {
    if (incident.size() != 2) continue;  // boundary edge
    const Node& na = mesh.nodes[verts.first];
    const Node& nb = mesh.nodes[verts.second];
    const double len = std::hypot(nb.x - na.x, nb.t - na.t);
    const double nx = (nb.t - na.t) / len;  // x-component of the unit normal
    if (nx == 0.0) continue;                // time-parallel edge carries no spatial flux jump

    double integral = 0.0;
    for (int q = 0; q < gn.size(); ++q) {
      const double s = 0.5 * (1.0 + gn[q]);
      const double x = (1.0 - s) * na.x + s * nb.x;
      const double t = (1.0 - s) * na.t + s * nb.t;
      StateVec flux[2];
      for (int side = 0; side < 2; ++side) {
        const int e = incident[side].first;
        const Eigen::Vector2d ref = mesh.reference_coordinates(e, x, t);
        const FieldValue fv = evaluate_field(space, coeffs, e, ref[0], ref[1]);
        const StateVec u = system.entropy.u(fv.value);
        const StateMat B = system.diffusion(u) * system.entropy.jac_u_from_value(u);
        flux[side] = B * fv.dx;
      }
      const StateVec jump = flux[0] - flux[1];
      integral += 0.5 * len * gw[q] * nx * nx * jump.squaredNorm();
    }
    for (int side = 0; side < 2; ++side)
      eta2[incident[side].first] += 0.5 * integral * mesh.element_diameter(incident[side].first);
  }

  std::vector<double> eta(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) eta[e] = std::sqrt(eta2[e]);
  return eta;
}

std::optional<double> waiting_time_track(const FeSpace& space, const Vector& coeffs,
                                         const EntropyDensity& entropy, double x_interface,
                                         double threshold, int samples) {
  const SpaceTimeMesh& mesh = *space.mesh;
  for (int j = 0; j < samples; ++j) {
    const double t =
        mesh.t_initial + (mesh.t_final - mesh.t_initial) * j / (samples - 1.0);
    const PointLocation loc = locate_point(mesh, x_interface, t);
    const FieldValue fv = evaluate_field(space, coeffs, loc.element, loc.xi, loc.eta);
    if (entropy.u(fv.value)[0] > threshold) return t;
  }
  return std::nullopt;
}

ProbeSeries probe_point_series(const std::vector<SlabField>& fields,
                               const EntropyDensity& entropy, double x_probe,
                               const std::vector<double>& sample_times) {
  ProbeSeries series;
  series.times = sample_times;
  for (double t : sample_times) {
    const SlabField& f = field_at(fields, t);
    const SpaceTimeMesh& mesh = *f.space->mesh;
    const double tc = std::clamp(t, mesh.t_initial, mesh.t_final);
    const PointLocation loc = locate_point(mesh, x_probe, tc);
    const FieldValue fv = evaluate_field(*f.space, *f.coeffs, loc.element, loc.xi, loc.eta);
    series.values.push_back(entropy.u(fv.value));
  }
  return series;
}

ProbeSeries probe_average_series(const std::vector<SlabField>& fields,
                                 const EntropyDensity& entropy, double x_lo, double x_hi,
                                 const std::vector<double>& sample_times) {
  ProbeSeries series;
  series.times = sample_times;
  const double width = x_hi - x_lo;
  for (double t : sample_times) {
    const SlabField& f = field_at(fields, t);
    const SpaceTimeMesh& mesh = *f.space->mesh;
    const double tc = std::clamp(t, mesh.t_initial, mesh.t_final);
    StateVec avg(entropy.components);
    for (int c = 0; c < entropy.components; ++c) {
      auto integrand = [&](const StateVec& w) { return entropy.u(w)[c]; };
      avg[c] = time_slice_integral(*f.space, *f.coeffs, tc, integrand, x_lo, x_hi) / width;
    }
    series.values.push_back(avg);
  }
  return series;
}

std::pair<double, double> log_linear_fit(const std::vector<double>& t,
                                         const std::vector<double>& y) {
  const size_t n = t.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("need >= 2 samples");
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (size_t i = 0; i < n; ++i) {
    const double ly = std::log(y[i]);
    st += t[i];
    sy += ly;
    stt += t[i] * t[i];
    sty += t[i] * ly;
  }
  const double denom = n * stt - st * st;
  const double slope = (n * sty - st * sy) / denom;
  const double intercept = (sy - slope * st) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (size_t i = 0; i < n; ++i) {
    const double ly = std::log(y[i]);
    ss_res += (ly - intercept - slope * t[i]) * (ly - intercept - slope * t[i]);
    ss_tot += (ly - mean) * (ly - mean);
  }
  const double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return {slope, r2};
}

}  // namespace crossdiff
