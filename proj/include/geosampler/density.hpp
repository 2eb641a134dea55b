#ifndef GEOSAMPLER_DENSITY_HPP
#define GEOSAMPLER_DENSITY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geosampler/errors.hpp"
#include "geosampler/metric.hpp"

namespace geosampler {

/// Axis-aligned compact set S, bounds inclusive.
struct CompactBox {
  Vector lower;
  Vector upper;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(lower.size()); }

  void validate() const {
    if (lower.size() == 0 || lower.size() != upper.size()) {
      throw ValidationError("box", "lower and upper must have the same nonzero length");
    }
    for (Eigen::Index k = 0; k < lower.size(); ++k) {
      if (!std::isfinite(lower(k)) || !std::isfinite(upper(k)) || !(lower(k) < upper(k))) {
        throw ValidationError("box", "need finite lower[" + std::to_string(k) + "] < upper[" +
                                         std::to_string(k) + "]");
      }
    }
  }

  bool contains(const Vector& z) const {
    return (z.array() >= lower.array()).all() && (z.array() <= upper.array()).all();
  }

  double volume() const { return (upper - lower).prod(); }
};

/// Bounding box of the centroids padded by 5T on every axis (a 10T cube
/// around the origin when the model has no centroids).
inline CompactBox default_box(const MetricModel& model) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  const double pad = 5.0 * model.temperature();
  Vector lo = Vector::Zero(d), hi = Vector::Zero(d);
  if (model.num_centroids() > 0) {
    lo = hi = model.centroids().front();
    for (const auto& c : model.centroids()) {
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
  }
  return CompactBox{lo.array() - pad, hi.array() + pad};
}

/// ½ log det G⁻¹(z) inside the box, −∞ outside.
inline double target_log_density_unnorm(const MetricModel& model, const Vector& z,
                                        const CompactBox& box) {
  model.check_point(z);
  if (box.dim() != model.dim()) throw DimensionError("box", model.dim(), box.dim());
  if (!box.contains(z)) return -std::numeric_limits<double>::infinity();
  return 0.5 * metric_inverse(model, z).log_det();
}

/// Target density tabulated at cell centres of a regular grid over a box.
/// Cells are stored with the last axis varying fastest.
class DensityGrid {
public:
  static constexpr std::size_t kMaxDim = 3;
  static constexpr std::size_t kMinResolution = 8;

  DensityGrid(CompactBox box, std::vector<std::size_t> resolution, std::vector<double> log_unnorm)
      : box_(std::move(box)), resolution_(std::move(resolution)), log_unnorm_(std::move(log_unnorm)) {
    box_.validate();
    if (resolution_.size() != box_.dim()) {
      throw DimensionError("grid resolution", box_.dim(), resolution_.size());
    }
    std::size_t cells = 1;
    for (std::size_t r : resolution_) {
      if (r == 0) throw ValidationError("resolution", "cell counts must be positive");
      cells *= r;
    }
    if (log_unnorm_.size() != cells) {
      throw ValidationError("log_unnorm", "expected " + std::to_string(cells) + " cells");
    }
    const double peak = *std::max_element(log_unnorm_.begin(), log_unnorm_.end());
    if (!std::isfinite(peak)) throw NumericalError("density grid has no finite cell value");
    double sum = 0.0;
    for (double v : log_unnorm_) sum += std::exp(v - peak);
    log_normalizer_ = peak + std::log(sum * cell_volume());
  }

  const CompactBox& box() const noexcept { return box_; }
  const std::vector<std::size_t>& resolution() const noexcept { return resolution_; }
  const std::vector<double>& log_unnorm() const noexcept { return log_unnorm_; }
  double log_normalizer() const noexcept { return log_normalizer_; }
  std::size_t num_cells() const noexcept { return log_unnorm_.size(); }
  std::size_t dim() const noexcept { return resolution_.size(); }

  double cell_width(std::size_t axis) const {
    const auto k = static_cast<Eigen::Index>(axis);
    return (box_.upper(k) - box_.lower(k)) / static_cast<double>(resolution_[axis]);
  }

  double cell_volume() const {
    double v = 1.0;
    for (std::size_t k = 0; k < dim(); ++k) v *= cell_width(k);
    return v;
  }

  std::vector<std::size_t> unflatten(std::size_t flat) const {
    std::vector<std::size_t> idx(dim());
    for (std::size_t k = dim(); k-- > 0;) {
      idx[k] = flat % resolution_[k];
      flat /= resolution_[k];
    }
    return idx;
  }

  Vector cell_center(std::size_t flat) const {
    const auto idx = unflatten(flat);
    Vector c(static_cast<Eigen::Index>(dim()));
    for (std::size_t k = 0; k < dim(); ++k) {
      c(static_cast<Eigen::Index>(k)) = box_.lower(static_cast<Eigen::Index>(k)) +
                                        (static_cast<double>(idx[k]) + 0.5) * cell_width(k);
    }
    return c;
  }

  /// Normalized density at the cell centre.
  double density(std::size_t flat) const { return std::exp(log_unnorm_[flat] - log_normalizer_); }

  /// Probability mass assigned to the cell; masses sum to one.
  double mass(std::size_t flat) const { return density(flat) * cell_volume(); }

  /// Flat index of the cell containing z; points on the upper face belong to
  /// the last cell. Empty when z is outside the box.
  std::optional<std::size_t> cell_of(const Vector& z) const {
    if (static_cast<std::size_t>(z.size()) != dim()) {
      throw DimensionError("sample", dim(), static_cast<std::size_t>(z.size()));
    }
    if (!box_.contains(z)) return std::nullopt;
    std::size_t flat = 0;
    for (std::size_t k = 0; k < dim(); ++k) {
      const auto ek = static_cast<Eigen::Index>(k);
      const double u = (z(ek) - box_.lower(ek)) / cell_width(k);
      auto i = static_cast<std::size_t>(std::max(0.0, std::floor(u)));
      i = std::min(i, resolution_[k] - 1);
      flat = flat * resolution_[k] + i;
    }
    return flat;
  }

private:
  CompactBox box_;
  std::vector<std::size_t> resolution_;
  std::vector<double> log_unnorm_;
  double log_normalizer_ = 0.0;
};

/// Midpoint-rule tabulation of the normalized target over `box`.
inline DensityGrid build_density_grid(const MetricModel& model, const CompactBox& box,
                                      const std::vector<std::size_t>& resolution) {
  box.validate();
  if (box.dim() != model.dim()) throw DimensionError("box", model.dim(), box.dim());
  if (model.dim() > DensityGrid::kMaxDim) {
    throw ValidationError("dim", "density oracle supports at most " +
                                     std::to_string(DensityGrid::kMaxDim) + " dimensions");
  }
  if (resolution.size() != model.dim()) {
    throw DimensionError("grid resolution", model.dim(), resolution.size());
  }
  std::size_t cells = 1;
  for (std::size_t r : resolution) {
    if (r < DensityGrid::kMinResolution) {
      throw ValidationError("resolution", "at least " +
                                              std::to_string(DensityGrid::kMinResolution) +
                                              " cells per axis required");
    }
    cells *= r;
  }
  // Tabulate on a placeholder grid first so cell_center is available.
  DensityGrid shape(box, resolution, std::vector<double>(cells, 0.0));
  std::vector<double> values(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    values[i] = target_log_density_unnorm(model, shape.cell_center(i), box);
  }
  return DensityGrid(box, resolution, std::move(values));
}

/// ½ Σ_cells |empirical − oracle| plus half the fraction of samples that
/// fell outside the box (the oracle puts no mass there).
inline double tv_distance(const DensityGrid& grid, std::span<const Vector> samples) {
  if (samples.empty()) throw ValidationError("samples", "TV distance needs at least one sample");
  std::vector<double> counts(grid.num_cells(), 0.0);
  double outside = 0.0;
  for (const Vector& z : samples) {
    if (auto cell = grid.cell_of(z)) {
      counts[*cell] += 1.0;
    } else {
      outside += 1.0;
    }
  }
  const double n = static_cast<double>(samples.size());
  double total = outside / n;
  for (std::size_t i = 0; i < counts.size(); ++i) total += std::abs(counts[i] / n - grid.mass(i));
  return std::clamp(0.5 * total, 0.0, 1.0);
}

}  // namespace geosampler

#endif  // GEOSAMPLER_DENSITY_HPP
