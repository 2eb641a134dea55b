#ifndef GEOSAMPLER_GEODESICS_HPP
#define GEOSAMPLER_GEODESICS_HPP

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "geosampler/errors.hpp"
#include "geosampler/metric.hpp"

namespace geosampler {

/// Position p and momentum q = G(p)·v of a point moving along a geodesic.
struct PhaseState {
  Vector position;
  Vector momentum;
};

struct IntegratorConfig {
  static constexpr std::size_t kDefaultSteps = 100;

  std::size_t n_steps = kDefaultSteps;
  bool record_path = false;

  void validate() const {
    if (n_steps < 1) throw ValidationError("integrator.n_steps", "must be at least 1");
  }
};

/// Result of integrating the geodesic flow over unit time.
///
/// With record_path set, `points` holds all n_steps + 1 positions; otherwise
/// only the start and end positions are kept.
struct GeodesicPath {
  std::vector<Vector> points;
  Vector endpoint;
  Vector initial_velocity;
  PhaseState final_state;
};

struct HamiltonianGradients {
  Vector grad_position;  // ∂H/∂p
  Vector grad_momentum;  // ∂H/∂q
};

namespace detail {

inline void check_state(const MetricModel& model, const PhaseState& state) {
  model.check_point(state.position, "position");
  model.check_point(state.momentum, "momentum");
}

// Both gradients in one pass over the centroids, without forming ∂G⁻¹/∂p_k.
inline void hamiltonian_grads_into(const MetricModel& model, const Vector& p, const Vector& q,
                                   Vector& grad_p, Vector& grad_q) {
  const double inv_t2 = 1.0 / (model.temperature() * model.temperature());
  grad_q = model.regularization() * q;
  grad_p.setZero(p.size());
  for (std::size_t i = 0; i < model.num_centroids(); ++i) {
    const Vector& c = model.centroids()[i];
    const double w = std::exp(-(p - c).squaredNorm() * inv_t2);
    if (w == 0.0) continue;
    const Matrix& prod = model.factor_product(i);
    const Vector pq = prod * q;
    grad_q.noalias() += w * pq;
    // ½ qᵀ (∂G⁻¹/∂p_k) q = ½ · (−2 (p_k − c_k)/T²) · w · qᵀ Pᵢ q
    grad_p.noalias() += (-inv_t2 * w * q.dot(pq)) * (p - c);
  }
}

}  // namespace detail

/// H(p, q) = ½ qᵀ G⁻¹(p) q
inline double hamiltonian(const MetricModel& model, const PhaseState& state) {
  detail::check_state(model, state);
  const SpdMatrix g_inv = metric_inverse(model, state.position);
  return 0.5 * state.momentum.dot(g_inv.entries() * state.momentum);
}

inline HamiltonianGradients hamiltonian_grads(const MetricModel& model, const PhaseState& state) {
  detail::check_state(model, state);
  HamiltonianGradients out;
  detail::hamiltonian_grads_into(model, state.position, state.momentum, out.grad_position,
                                 out.grad_momentum);
  return out;
}

/// Integrates Hamilton's equations ṗ = ∂H/∂q, q̇ = −∂H/∂p over t ∈ [0, 1]
/// with n_steps explicit midpoint (RK2) steps. Both half-step gradients are
/// taken at (p_t, q_t); the full step uses the gradients at the midpoint.
inline GeodesicPath integrate_geodesic(const MetricModel& model, const PhaseState& start,
                                       const IntegratorConfig& cfg) {
  detail::check_state(model, start);
  cfg.validate();

  const double dt = 1.0 / static_cast<double>(cfg.n_steps);
  Vector p = start.position;
  Vector q = start.momentum;
  Vector grad_p(p.size()), grad_q(p.size());
  Vector p_half(p.size()), q_half(p.size());

  GeodesicPath path;
  path.points.reserve(cfg.record_path ? cfg.n_steps + 1 : 2);
  path.points.push_back(p);

  for (std::size_t t = 0; t < cfg.n_steps; ++t) {
    detail::hamiltonian_grads_into(model, p, q, grad_p, grad_q);
    p_half = p + 0.5 * dt * grad_q;
    q_half = q - 0.5 * dt * grad_p;
    detail::hamiltonian_grads_into(model, p_half, q_half, grad_p, grad_q);
    p += dt * grad_q;
    q -= dt * grad_p;
    if (!p.allFinite() || !q.allFinite()) {
      throw IntegrationError("geodesic integration produced a non-finite state", t + 1);
    }
    if (cfg.record_path) path.points.push_back(p);
  }
  if (!cfg.record_path) path.points.push_back(p);

  path.endpoint = p;
  path.initial_velocity = metric_inverse(model, start.position).entries() * start.momentum;
  path.final_state = PhaseState{std::move(p), std::move(q)};
  return path;
}

/// Exp_{z0}(v): converts v to the initial momentum q₀ = G(z0)·v (the only
/// metric inversion), then integrates the geodesic flow.
inline GeodesicPath exp_map(const MetricModel& model, const Vector& z0, const Vector& v,
                            const IntegratorConfig& cfg) {
  model.check_point(z0, "z0");
  model.check_point(v, "velocity");
  if (!z0.allFinite() || !v.allFinite()) {
    throw IntegrationError("non-finite start position or velocity", 0);
  }
  Vector q0 = metric_inverse(model, z0).solve(v);
  GeodesicPath path = integrate_geodesic(model, PhaseState{z0, std::move(q0)}, cfg);
  path.initial_velocity = v;
  return path;
}

/// Riemannian length of a polyline: Σ √(Δᵀ G(midpoint) Δ).
inline double curve_length(const MetricModel& model, const GeodesicPath& path) {
  if (path.points.size() < 2) {
    throw ValidationError("path.points", "curve length needs at least 2 points");
  }
  double length = 0.0;
  for (std::size_t i = 1; i < path.points.size(); ++i) {
    const Vector& a = path.points[i - 1];
    const Vector& b = path.points[i];
    model.check_point(a);
    model.check_point(b);
    const Vector delta = b - a;
    if (delta.isZero(0.0)) continue;
    const Vector mid = 0.5 * (a + b);
    length += std::sqrt(delta.dot(metric_inverse(model, mid).solve(delta)));
  }
  return length;
}

}  // namespace geosampler

#endif  // GEOSAMPLER_GEODESICS_HPP
