#pragma once

// Classical PCA baseline: accumulate the empirical covariance, then extract
// its top-p eigenspace by subspace iteration with Rayleigh-Ritz projection.

#include <cstdint>
#include <optional>
#include <string>

#include "ojapca/geometry.hpp"
#include "ojapca/rng.hpp"

namespace ojapca {

/// Running sum of x x^T. Only the lower triangle is accumulated; the
/// materialized covariance is symmetric by construction.
template <typename Scalar>
class EmpiricalCovariance {
 public:
  explicit EmpiricalCovariance(Index d) : sum_(Matrix<Scalar>::Zero(d, d)) {}

  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& x) {
    if (x.size() != dim()) throw Error(Errc::dimension_mismatch, "sample length differs from d");
    sum_.template selfadjointView<Eigen::Lower>().rankUpdate(x);
    ++count_;
  }

  /// Shard merge: sums add.
  void merge(const EmpiricalCovariance& other) {
    if (other.dim() != dim()) throw Error(Errc::dimension_mismatch, "accumulators differ in d");
    sum_.template triangularView<Eigen::Lower>() += other.sum_;
    count_ += other.count_;
  }

  /// (1/n) sum x x^T; zero matrix when nothing was accumulated.
  Matrix<Scalar> covariance() const {
    Matrix<Scalar> out = sum_outer();
    if (count_ > 0) out /= Scalar(count_);
    return out;
  }

  Matrix<Scalar> sum_outer() const { return sum_.template selfadjointView<Eigen::Lower>(); }

  std::int64_t count() const noexcept { return count_; }
  Index dim() const noexcept { return sum_.rows(); }
  /// Scalars held by the accumulator (d^2).
  std::int64_t footprint() const noexcept { return std::int64_t(sum_.size()); }

 private:
  Matrix<Scalar> sum_;
  std::int64_t count_{0};
};

struct SubspaceIterationOptions {
  double tol{1e-10};
  std::int64_t max_iter{10000};
  /// Random Gaussian start; deterministic start when empty.
  std::optional<std::uint64_t> seed;
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> thin_q(const Matrix<Scalar>& m) {
  Eigen::HouseholderQR<Matrix<Scalar>> qr(m);
  return qr.householderQ() * Matrix<Scalar>::Identity(m.rows(), m.cols());
}

}  // namespace detail

/// Top-p eigenspace of a symmetric matrix A. One extra guard vector (block
/// size p + 1) exposes lambda_{p+1} for the gap test. Converged when
/// ||A Q - Q (Q^T A Q)||_F <= tol * lambda_1.
template <typename Derived>
Basis<typename Derived::Scalar> top_p_eigenspace(const Eigen::MatrixBase<Derived>& A, Index p,
                                                 const SubspaceIterationOptions& options = {}) {
  using Scalar = typename Derived::Scalar;
  using Mat = Matrix<Scalar>;
  const Index d = A.rows();
  if (A.cols() != d) throw Error(Errc::shape_mismatch, "matrix must be square");
  if (p < 1 || p > d) throw Error(Errc::invalid_argument, "need 1 <= p <= d");
  const Index k = std::min<Index>(p + 1, d);
  const Mat a = A;

  // The identity start can miss the dominant eigenspace entirely (e.g. when
  // it is spanned by trailing coordinates), so it is always perturbed.
  Mat start(d, k);
  if (options.seed) {
    rng::Cursor cursor(*options.seed);
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < d; ++i) start(i, j) = Scalar(cursor.normal());
  } else {
    rng::Cursor cursor(0);
    start = Mat::Identity(d, k);
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < d; ++i) start(i, j) += Scalar(1e-3) * Scalar(cursor.normal());
  }
  Mat q = detail::thin_q<Scalar>(start);

  const Scalar tol(options.tol);
  for (std::int64_t iter = 0; iter < options.max_iter; ++iter) {
    Mat aq = a * q;
    // Rayleigh-Ritz on span(q).
    const Mat h = q.transpose() * aq;
    Eigen::SelfAdjointEigenSolver<Mat> eig(Mat(Scalar(0.5) * (h + h.transpose())));
    const Mat vectors = eig.eigenvectors().rowwise().reverse();
    const Vector<Scalar> ritz = eig.eigenvalues().reverse();
    q = q * vectors;
    aq = aq * vectors;

    const Scalar scale = std::max(std::abs(ritz(0)), std::abs(ritz(k - 1)));
    if (!(scale > 0)) throw Error(Errc::gap_too_small, "matrix is zero");
    const Mat residual = aq.leftCols(p) - q.leftCols(p) * ritz.head(p).asDiagonal();
    if (residual.norm() <= tol * scale) {
      if (k > p && !(ritz(p - 1) - ritz(p) > tol * scale)) {
        throw Error(Errc::gap_too_small, "eigenvalue gap at p is below tol * lambda_1");
      }
      return Basis<Scalar>(q.leftCols(p), typename Basis<Scalar>::Trusted{});
    }
    q = detail::thin_q<Scalar>(aq);
  }
  throw Error(Errc::no_convergence, "subspace iteration hit max_iter=" + std::to_string(options.max_iter));
}

/// Top-p eigenspace of the empirical covariance.
template <typename Scalar>
Basis<Scalar> top_p_subspace(const EmpiricalCovariance<Scalar>& acc, Index p,
                             const SubspaceIterationOptions& options = {}) {
  if (acc.count() < 1) throw Error(Errc::invalid_argument, "no samples accumulated");
  return top_p_eigenspace(acc.covariance(), p, options);
}

}  // namespace ojapca
