#ifndef GEOSAMPLER_SPD_HPP
#define GEOSAMPLER_SPD_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

#include "geosampler/errors.hpp"

namespace geosampler {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Bitwise-style equality that tolerates mismatched shapes.
template <typename A, typename B>
bool same_entries(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

template <typename T>
bool same_entries(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_entries(a[i], b[i])) return false;
  }
  return true;
}

/// Symmetric positive definite matrix with its Cholesky factor cached.
/// Construction fails unless the input is symmetric (relative 1e-12) and
/// the factorization succeeds.
class SpdMatrix {
public:
  static constexpr double kSymmetryTolerance = 1e-12;

  explicit SpdMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
      throw NumericalError("SpdMatrix: matrix must be square and non-empty");
    }
    const double scale = entries_.cwiseAbs().maxCoeff();
    const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
    if (!std::isfinite(scale) || asym > kSymmetryTolerance * scale) {
      throw NumericalError("SpdMatrix: matrix is not symmetric");
    }
    llt_.compute(entries_);
    if (llt_.info() != Eigen::Success) {
      throw NumericalError("SpdMatrix: Cholesky factorization failed (not positive definite)");
    }
  }

  static SpdMatrix identity(std::size_t dim, double scale = 1.0) {
    return SpdMatrix(scale * Matrix::Identity(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim)));
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  const Matrix& entries() const noexcept { return entries_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

  /// Lower-triangular L with entries() = L Lᵀ.
  Matrix chol() const { return llt_.matrixL(); }

  double log_det() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  }

  Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }

  SpdMatrix inverse() const {
    Matrix inv = llt_.solve(Matrix::Identity(entries_.rows(), entries_.cols()));
    return SpdMatrix(0.5 * (inv + inv.transpose()));
  }

  /// L·x, mapping a standard normal draw to N(0, entries()).
  Vector correlate(const Vector& x) const { return llt_.matrixL() * x; }

private:
  Matrix entries_;
  Eigen::LLT<Matrix> llt_;
};

}  // namespace geosampler

#endif  // GEOSAMPLER_SPD_HPP
