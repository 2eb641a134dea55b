#ifndef GEOSAMPLER_METRIC_HPP
#define GEOSAMPLER_METRIC_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "geosampler/errors.hpp"
#include "geosampler/spd.hpp"

namespace geosampler {

/// Learned latent-space metric. The inverse metric is an RBF mixture of
/// SPD factor products over centroids plus an isotropic floor:
///
///   G⁻¹(z) = Σᵢ Lᵢ Lᵢᵀ exp(−‖z − cᵢ‖² / T²) + λ I
///
/// Immutable once constructed; the constructor enforces every invariant
/// and reports the offending field.
class MetricModel {
public:
  MetricModel(std::size_t dim, std::vector<Vector> centroids, std::vector<Matrix> factors,
              double temperature, double regularization)
      : dim_(dim),
        centroids_(std::move(centroids)),
        factors_(std::move(factors)),
        temperature_(temperature),
        regularization_(regularization) {
    validate();
    products_.reserve(factors_.size());
    for (const auto& l : factors_) products_.push_back(l * l.transpose());
  }

  /// N = 0 model: G⁻¹ ≡ λ I.
  static MetricModel constant(std::size_t dim, double regularization) {
    return MetricModel(dim, {}, {}, 1.0, regularization);
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_centroids() const noexcept { return centroids_.size(); }
  const std::vector<Vector>& centroids() const noexcept { return centroids_; }
  const std::vector<Matrix>& factors() const noexcept { return factors_; }
  double temperature() const noexcept { return temperature_; }
  double regularization() const noexcept { return regularization_; }

  /// Lᵢ Lᵢᵀ, precomputed.
  const Matrix& factor_product(std::size_t i) const { return products_[i]; }

  /// exp(−‖z − cᵢ‖² / T²)
  double weight(std::size_t i, const Vector& z) const {
    return std::exp(-(z - centroids_[i]).squaredNorm() / (temperature_ * temperature_));
  }

  void check_point(const Vector& z, const char* what = "point") const {
    if (static_cast<std::size_t>(z.size()) != dim_) {
      throw DimensionError(what, dim_, static_cast<std::size_t>(z.size()));
    }
  }

  friend bool operator==(const MetricModel& a, const MetricModel& b) {
    return a.dim_ == b.dim_ && same_entries(a.centroids_, b.centroids_) &&
           same_entries(a.factors_, b.factors_) &&
           a.temperature_ == b.temperature_ && a.regularization_ == b.regularization_;
  }

private:
  void validate() const {
    if (dim_ == 0) throw ValidationError("dim", "must be positive");
    if (!(temperature_ > 0.0) || !std::isfinite(temperature_)) {
      throw ValidationError("temperature", "must be a positive finite number");
    }
    if (!(regularization_ > 0.0) || !std::isfinite(regularization_)) {
      throw ValidationError("regularization", "must be a positive finite number");
    }
    if (centroids_.size() != factors_.size()) {
      throw ValidationError("factors", "expected " + std::to_string(centroids_.size()) +
                                           " factors (one per centroid), got " +
                                           std::to_string(factors_.size()));
    }
    const auto d = static_cast<Eigen::Index>(dim_);
    for (std::size_t i = 0; i < centroids_.size(); ++i) {
      const std::string field = "centroids[" + std::to_string(i) + "]";
      if (centroids_[i].size() != d) {
        throw ValidationError(field, "expected length " + std::to_string(dim_));
      }
      if (!centroids_[i].allFinite()) throw ValidationError(field, "non-finite coordinate");
    }
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      const std::string field = "factors[" + std::to_string(i) + "]";
      const Matrix& l = factors_[i];
      if (l.rows() != d || l.cols() != d) {
        throw ValidationError(field, "expected a " + std::to_string(dim_) + "x" +
                                         std::to_string(dim_) + " matrix");
      }
      if (!l.allFinite()) throw ValidationError(field, "non-finite entry");
      for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = r + 1; c < d; ++c) {
          if (l(r, c) != 0.0) throw ValidationError(field, "not lower-triangular");
        }
        if (!(l(r, r) > 0.0)) {
          throw ValidationError(field, "diagonal entry " + std::to_string(r) +
                                           " is not strictly positive");
        }
      }
    }
  }

  std::size_t dim_;
  std::vector<Vector> centroids_;
  std::vector<Matrix> factors_;
  double temperature_;
  double regularization_;
  std::vector<Matrix> products_;
};

inline SpdMatrix metric_inverse(const MetricModel& model, const Vector& z) {
  model.check_point(z);
  const auto d = static_cast<Eigen::Index>(model.dim());
  Matrix g_inv = model.regularization() * Matrix::Identity(d, d);
  for (std::size_t i = 0; i < model.num_centroids(); ++i) {
    g_inv.noalias() += model.weight(i, z) * model.factor_product(i);
  }
  return SpdMatrix(std::move(g_inv));
}

/// G(z), obtained by inverting G⁻¹(z) through its Cholesky factor.
inline SpdMatrix metric(const MetricModel& model, const Vector& z) {
  return metric_inverse(model, z).inverse();
}

/// log √det G(z) = −Σ log diag(chol G⁻¹(z)).
inline double log_volume_element(const MetricModel& model, const Vector& z) {
  return -0.5 * metric_inverse(model, z).log_det() + 0.0;  // no -0
}

/// ∂G⁻¹/∂z_k for k = 0..d−1.
inline std::vector<Matrix> grad_metric_inverse(const MetricModel& model, const Vector& z) {
  model.check_point(z);
  const auto d = static_cast<Eigen::Index>(model.dim());
  std::vector<Matrix> grads(model.dim(), Matrix::Zero(d, d));
  const double inv_t2 = 1.0 / (model.temperature() * model.temperature());
  for (std::size_t i = 0; i < model.num_centroids(); ++i) {
    const Vector diff = z - model.centroids()[i];
    const double w = std::exp(-diff.squaredNorm() * inv_t2);
    for (Eigen::Index k = 0; k < d; ++k) {
      grads[static_cast<std::size_t>(k)].noalias() +=
          (-2.0 * diff(k) * inv_t2 * w) * model.factor_product(i);
    }
  }
  return grads;
}

}  // namespace geosampler

#endif  // GEOSAMPLER_METRIC_HPP
