#ifndef GEOSAMPLER_SAMPLING_HPP
#define GEOSAMPLER_SAMPLING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "geosampler/density.hpp"
#include "geosampler/errors.hpp"
#include "geosampler/geodesics.hpp"
#include "geosampler/metric.hpp"

namespace geosampler {

using Rng = std::mt19937_64;

/// 𝒩^W(p, Σ): a tangent Gaussian at p pushed through Exp_p.
struct WrappedNormalSpec {
  Vector base_point;
  SpdMatrix covariance;
};

struct ChainConfig {
  std::size_t chain_length = 1;
  std::size_t burn_in = 0;
  std::size_t thinning = 1;
  std::uint64_t seed = 0;
  IntegratorConfig integrator{};
  SpdMatrix covariance = SpdMatrix::identity(1);
  /// When set, proposals outside the box are rejected, so the chain targets
  /// ρ_S·√det G⁻¹ exactly. Unset reproduces the unconstrained walk.
  std::optional<CompactBox> support{};

  /// burn_in defaults to 10% of the chain length.
  static ChainConfig make(SpdMatrix covariance, std::size_t chain_length, std::uint64_t seed) {
    ChainConfig cfg;
    cfg.covariance = std::move(covariance);
    cfg.chain_length = chain_length;
    cfg.burn_in = chain_length / 10;
    cfg.seed = seed;
    return cfg;
  }

  void validate(std::size_t dim) const {
    if (chain_length < 1) throw ValidationError("chain_length", "must be at least 1");
    if (burn_in >= chain_length) {
      throw ValidationError("burn_in", "must be smaller than chain_length (no samples retained)");
    }
    if (thinning < 1) throw ValidationError("thinning", "must be at least 1");
    integrator.validate();
    if (covariance.dim() != dim) throw DimensionError("covariance", dim, covariance.dim());
    if (support) {
      support->validate();
      if (support->dim() != dim) throw DimensionError("support", dim, support->dim());
    }
  }

  std::size_t retained_count() const {
    return (chain_length - burn_in + thinning - 1) / thinning;
  }
};

struct ChainResult {
  std::vector<Vector> samples;
  std::vector<std::size_t> sample_steps;  // 1-based chain step of each sample
  std::vector<std::uint8_t> sample_accepted;
  double acceptance_rate = 0.0;
  std::size_t proposals_total = 0;
  std::size_t accepted_total = 0;
  std::vector<double> log_volume_trace;  // ½ log det G of the state after each step
  std::uint64_t seed = 0;
};

/// Draws v = chol(Σ)·ε and returns Exp_p(v).
inline Vector wrapped_normal_sample(const MetricModel& model, const WrappedNormalSpec& spec,
                                    const IntegratorConfig& cfg, Rng& rng) {
  model.check_point(spec.base_point, "base_point");
  if (spec.covariance.dim() != model.dim()) {
    throw DimensionError("covariance", model.dim(), spec.covariance.dim());
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector eps(static_cast<Eigen::Index>(model.dim()));
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps(k) = normal(rng);
  return exp_map(model, spec.base_point, spec.covariance.correlate(eps), cfg).endpoint;
}

namespace detail {

inline double log_det_inverse_metric(const MetricModel& model, const Vector& z) {
  return metric_inverse(model, z).log_det();
}

inline double acceptance_from_log_dets(double log_det_current, double log_det_proposal) {
  const double log_ratio = 0.5 * (log_det_proposal - log_det_current);
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

}  // namespace detail

/// α(z̃, z) = min(1, √det G⁻¹(z̃) / √det G⁻¹(z)), evaluated in log space.
inline double acceptance_ratio(const MetricModel& model, const Vector& current,
                               const Vector& proposal) {
  model.check_point(current, "current");
  model.check_point(proposal, "proposal");
  return detail::acceptance_from_log_dets(detail::log_det_inverse_metric(model, current),
                                          detail::log_det_inverse_metric(model, proposal));
}

/// Metropolis-style walk with wrapped-normal proposals. Each step consumes
/// d normal draws for the velocity, then one uniform; a rejected proposal
/// repeats the current state.
inline ChainResult riemannian_random_walk(const MetricModel& model, const Vector& z0,
                                          const ChainConfig& cfg) {
  model.check_point(z0, "z0");
  cfg.validate(model.dim());
  if (cfg.support && !cfg.support->contains(z0)) {
    throw ValidationError("z0", "start point lies outside the support box");
  }

  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  ChainResult result;
  result.seed = cfg.seed;
  result.samples.reserve(cfg.retained_count());
  result.sample_steps.reserve(cfg.retained_count());
  result.sample_accepted.reserve(cfg.retained_count());
  result.log_volume_trace.reserve(cfg.chain_length);

  Vector current = z0;
  double current_log_det = detail::log_det_inverse_metric(model, current);
  WrappedNormalSpec spec{current, cfg.covariance};

  for (std::size_t t = 1; t <= cfg.chain_length; ++t) {
    spec.base_point = current;
    Vector proposal;
    try {
      proposal = wrapped_normal_sample(model, spec, cfg.integrator, rng);
    } catch (const IntegrationError& e) {
      throw IntegrationError(std::string("chain aborted: ") + e.what(), t);
    }
    const double u = uniform(rng);

    bool accepted = false;
    double proposal_log_det = 0.0;
    if (!cfg.support || cfg.support->contains(proposal)) {
      proposal_log_det = detail::log_det_inverse_metric(model, proposal);
      const double alpha = detail::acceptance_from_log_dets(current_log_det, proposal_log_det);
      accepted = alpha >= 1.0 || u < alpha;
    }
    if (accepted) {
      current = std::move(proposal);
      current_log_det = proposal_log_det;
      ++result.accepted_total;
    }
    result.log_volume_trace.push_back(-0.5 * current_log_det);

    if (t > cfg.burn_in && (t - cfg.burn_in - 1) % cfg.thinning == 0) {
      result.samples.push_back(current);
      result.sample_steps.push_back(t);
      result.sample_accepted.push_back(accepted ? 1 : 0);
    }
  }
  result.proposals_total = cfg.chain_length;
  result.acceptance_rate =
      static_cast<double>(result.accepted_total) / static_cast<double>(result.proposals_total);
  return result;
}

/// Runs `chains` independent walks with seeds seed, seed+1, ... on up to
/// `max_threads` threads. Results are ordered by chain index.
inline std::vector<ChainResult> run_chains(const MetricModel& model, const Vector& z0,
                                           const ChainConfig& cfg, std::size_t chains,
                                           std::size_t max_threads) {
  std::vector<ChainResult> results(chains);
  std::vector<std::exception_ptr> errors(chains);
  const std::size_t workers = std::max<std::size_t>(1, std::min(max_threads, chains));

  auto run_slice = [&](std::size_t first) {
    for (std::size_t c = first; c < chains; c += workers) {
      try {
        ChainConfig local = cfg;
        local.seed = cfg.seed + c;
        results[c] = riemannian_random_walk(model, z0, local);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };

  if (workers == 1) {
    run_slice(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_slice, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

/// Default start: the centroid closest to the centroids' mean (origin for N = 0).
inline Vector default_start(const MetricModel& model) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  if (model.num_centroids() == 0) return Vector::Zero(d);
  Vector mean = Vector::Zero(d);
  for (const auto& c : model.centroids()) mean += c;
  mean /= static_cast<double>(model.num_centroids());
  const auto& cs = model.centroids();
  return *std::min_element(cs.begin(), cs.end(), [&](const Vector& a, const Vector& b) {
    return (a - mean).squaredNorm() < (b - mean).squaredNorm();
  });
}

}  // namespace geosampler

#endif  // GEOSAMPLER_SAMPLING_HPP
