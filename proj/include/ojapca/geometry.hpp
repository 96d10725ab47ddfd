#pragma once

// Dense subspace geometry: canonical angles, sin/tan metrics, the block
// operator T(X) = X_bottom * inv(X_top), and orthonormalization helpers.
// Every routine is templated on the scalar type and accepts any Eigen dense
// expression; shapes are checked at run time.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "ojapca/errors.hpp"

namespace ojapca {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Unitarily invariant norms supported by the angle metrics.
enum class Norm { spectral, frobenius };

/// max |B^T B - I|, entrywise.
template <typename Derived>
typename Derived::Scalar orthonormality_error(const Eigen::MatrixBase<Derived>& B) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> gram = B.transpose() * B;
  return (gram - Matrix<Scalar>::Identity(B.cols(), B.cols())).cwiseAbs().maxCoeff();
}

/// A d x p column-orthonormal matrix, i.e. a point on the Grassmannian with a
/// chosen basis. The checked constructor enforces 1 <= p <= d and
/// max|B^T B - I| <= tol.
template <typename Scalar>
class Basis {
 public:
  using MatrixType = Matrix<Scalar>;

  /// Tag for callers that already guarantee orthonormality.
  struct Trusted {};

  explicit Basis(MatrixType entries, Scalar tol = Scalar(1e-10)) : entries_(std::move(entries)) {
    if (entries_.cols() < 1 || entries_.rows() < entries_.cols()) {
      throw Error(Errc::shape_mismatch, "basis must satisfy d >= p >= 1, got " +
                                            std::to_string(entries_.rows()) + "x" +
                                            std::to_string(entries_.cols()));
    }
    if (!entries_.allFinite()) throw Error(Errc::non_finite, "basis has non-finite entries");
    const Scalar err = orthonormality_error(entries_);
    if (!(err <= tol)) {
      throw Error(Errc::invalid_argument,
                  "columns are not orthonormal (max |B^T B - I| = " + std::to_string(double(err)) + ")");
    }
  }

  Basis(MatrixType entries, Trusted) noexcept : entries_(std::move(entries)) {}

  const MatrixType& matrix() const noexcept { return entries_; }
  Index ambient_dim() const noexcept { return entries_.rows(); }
  Index dim() const noexcept { return entries_.cols(); }

 private:
  MatrixType entries_;
};

using BasisMatrix = Basis<double>;

/// Value of ||tan Theta||. `unbounded` marks an angle at pi/2; `value` is then
/// meaningless and left at zero so that aggregates never see inf or NaN.
template <typename Scalar>
struct TanThetaNorm {
  Scalar value{0};
  bool unbounded{false};

  static TanThetaNorm infinite() { return {Scalar(0), true}; }
  bool is_finite() const noexcept { return !unbounded; }
};

namespace detail {

template <typename DX, typename DY>
void check_same_shape(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols()) {
    throw Error(Errc::shape_mismatch, "operands are " + std::to_string(X.rows()) + "x" +
                                          std::to_string(X.cols()) + " and " + std::to_string(Y.rows()) +
                                          "x" + std::to_string(Y.cols()));
  }
}

// Above this cosine, arccos loses about half the digits; switch to arcsin of
// the singular values of the complementary projection (I - XX^T) Y.
template <typename Scalar>
constexpr Scalar small_angle_cosine() {
  return Scalar(1) - Scalar(1e-8);
}

template <typename DX, typename DY>
Vector<typename DX::Scalar> canonical_angles_dense(const Eigen::MatrixBase<DX>& X,
                                                   const Eigen::MatrixBase<DY>& Y) {
  using Scalar = typename DX::Scalar;
  check_same_shape(X, Y);
  const Index p = X.cols();
  const Matrix<Scalar> cross = X.transpose() * Y;
  const Vector<Scalar> cosines = Eigen::JacobiSVD<Matrix<Scalar>>(cross).singularValues();  // descending

  Vector<Scalar> sines;
  if (p > 0 && cosines(0) > small_angle_cosine<Scalar>()) {
    const Matrix<Scalar> residual = Y - X * cross;
    sines = Eigen::JacobiSVD<Matrix<Scalar>>(residual).singularValues();  // descending
  }

  Vector<Scalar> angles(p);
  for (Index j = 0; j < p; ++j) {
    const Scalar c = std::clamp(cosines(p - 1 - j), Scalar(0), Scalar(1));
    if (c > small_angle_cosine<Scalar>()) {
      angles(j) = std::asin(std::clamp(sines(j), Scalar(0), Scalar(1)));
    } else {
      angles(j) = std::acos(c);
    }
  }
  // acos and asin branches can disagree in the last bit across the switch.
  for (Index j = 1; j < p; ++j) angles(j) = std::min(angles(j), angles(j - 1));
  return angles;
}

template <typename Derived>
typename Derived::Scalar norm_of_diagonal(const Eigen::MatrixBase<Derived>& values, Norm norm) {
  using Scalar = typename Derived::Scalar;
  if (values.size() == 0) return Scalar(0);
  return norm == Norm::spectral ? values.cwiseAbs().maxCoeff() : values.norm();
}

}  // namespace detail

/// Canonical angles theta_1 >= ... >= theta_p in [0, pi/2] between span(X)
/// and span(Y).
template <typename Scalar>
Vector<Scalar> canonical_angles(const Basis<Scalar>& X, const Basis<Scalar>& Y) {
  return detail::canonical_angles_dense(X.matrix(), Y.matrix());
}

template <typename Scalar>
Scalar sin_theta_norm(const Basis<Scalar>& X, const Basis<Scalar>& Y, Norm norm) {
  const Vector<Scalar> sines = canonical_angles(X, Y).array().sin().matrix();
  return detail::norm_of_diagonal(sines, norm);
}

/// The block operator T(X) = X(p+1:d, :) * X(1:p, :)^{-1}.
/// Throws SingularTopBlock when the top p x p block has condition number
/// above 1e12.
template <typename Derived>
Matrix<typename Derived::Scalar> scr_t(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  const Index d = X.rows();
  const Index p = X.cols();
  if (p < 1 || d < p) throw Error(Errc::shape_mismatch, "scr_t needs d >= p >= 1");
  const Matrix<Scalar> top = X.topRows(p);
  Eigen::JacobiSVD<Matrix<Scalar>> svd(top, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Scalar smax = sv(0);
  const Scalar smin = sv(p - 1);
  if (!(smin > 0) || smax > Scalar(1e12) * smin) {
    throw Error(Errc::singular_top_block, "top block is singular or has condition number > 1e12");
  }
  const Matrix<Scalar> top_inverse =
      svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  return X.bottomRows(d - p) * top_inverse;
}

/// ||tan Theta(X, [I_p; 0])|| via ||T(X)||. X need not be orthonormal.
template <typename Derived>
typename Derived::Scalar tan_theta_norm_vs_reference(const Eigen::MatrixBase<Derived>& X, Norm norm) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> t = scr_t(X);
  if (t.size() == 0) return Scalar(0);
  if (norm == Norm::frobenius) return t.norm();
  return Eigen::JacobiSVD<Matrix<Scalar>>(t).singularValues()(0);
}

/// ||tan Theta(X, U_star)|| through the canonical angles; unbounded when the
/// largest angle is within 1e-12 of pi/2.
template <typename Scalar>
TanThetaNorm<Scalar> tan_theta_norm(const Basis<Scalar>& X, const Basis<Scalar>& U_star, Norm norm) {
  const Vector<Scalar> angles = canonical_angles(X, U_star);
  if (angles(0) >= std::numbers::pi_v<Scalar> / 2 - Scalar(1e-12)) return TanThetaNorm<Scalar>::infinite();
  const Vector<Scalar> tangents = angles.array().tan().matrix();
  return {detail::norm_of_diagonal(tangents, norm), false};
}

/// (W^T W)^{-1/2} by symmetric eigendecomposition.
template <typename Derived>
Matrix<typename Derived::Scalar> inverse_sqrt_gram(const Eigen::MatrixBase<Derived>& W) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> gram = W.transpose() * W;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gram);
  const auto& ev = eig.eigenvalues();  // ascending
  const Index p = ev.size();
  if (p == 0 || !(ev(p - 1) > 0) || !(ev(0) > Scalar(1e-14) * ev(p - 1))) {
    throw Error(Errc::rank_deficient, "Gram matrix is not positive definite");
  }
  return eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

/// Orthonormal basis of the column space of M. Columns follow the order of M
/// (Householder QR with the R diagonal made positive); rank is judged from the
/// singular values of R, which equal those of M.
template <typename Derived>
Basis<typename Derived::Scalar> orthonormalize(const Eigen::MatrixBase<Derived>& M) {
  using Scalar = typename Derived::Scalar;
  const Index d = M.rows();
  const Index p = M.cols();
  if (p < 1 || d < p) throw Error(Errc::rank_deficient, "more columns than rows");
  if (!M.allFinite()) throw Error(Errc::non_finite, "matrix has non-finite entries");

  Eigen::HouseholderQR<Matrix<Scalar>> qr(M);
  const Matrix<Scalar> r = qr.matrixQR().topRows(p).template triangularView<Eigen::Upper>();
  const auto sv = Eigen::JacobiSVD<Matrix<Scalar>>(r).singularValues();
  if (!(sv(0) > 0) || !(sv(p - 1) > Scalar(1e-12) * sv(0))) {
    throw Error(Errc::rank_deficient, "matrix does not have full column rank");
  }
  Matrix<Scalar> q = qr.householderQ() * Matrix<Scalar>::Identity(d, p);
  for (Index k = 0; k < p; ++k) {
    if (r(k, k) < 0) q.col(k) = -q.col(k);
  }
  return Basis<Scalar>(std::move(q), typename Basis<Scalar>::Trusted{});
}

template <typename Scalar>
struct SphereMembership {
  bool member{false};
  Scalar sigma_min{0};
  /// ||T(V)||_2 when the top block is invertible, otherwise unbounded.
  TanThetaNorm<Scalar> t_norm;
};

/// Membership of V in S(kappa): all singular values of the top p x p block lie
/// in [1/kappa, 1]. Cross-checks against ||T(V)||_2 <= sqrt(kappa^2 - 1).
template <typename Derived>
SphereMembership<typename Derived::Scalar> sphere_membership(const Eigen::MatrixBase<Derived>& V,
                                                             typename Derived::Scalar kappa) {
  using Scalar = typename Derived::Scalar;
  if (!(kappa > 1)) throw Error(Errc::invalid_argument, "kappa must exceed 1");
  const Index p = V.cols();
  const Matrix<Scalar> top = V.topRows(p);
  const auto sv = Eigen::JacobiSVD<Matrix<Scalar>>(top).singularValues();
  SphereMembership<Scalar> out;
  out.sigma_min = sv(p - 1);
  out.member = out.sigma_min >= Scalar(1) / kappa && sv(0) <= Scalar(1) + Scalar(1e-12);

  if (out.sigma_min > 0 && sv(0) <= Scalar(1e12) * out.sigma_min) {
    out.t_norm = {tan_theta_norm_vs_reference(V, Norm::spectral), false};
    // sigma_min = 1/sqrt(1 + ||T||^2), so both tests compare the same number.
    const Scalar bound = std::sqrt(kappa * kappa - 1);
    const bool by_t = out.t_norm.value <= bound;
    const bool near_boundary = std::abs(out.sigma_min - Scalar(1) / kappa) <= Scalar(1e-8) ||
                               std::abs(out.t_norm.value - bound) <= Scalar(1e-8) * std::max(Scalar(1), bound);
    if (by_t != out.member && !near_boundary) {
      throw std::logic_error("sphere membership disagrees with the T(V) characterization");
    }
  } else {
    out.t_norm = TanThetaNorm<Scalar>::infinite();
    out.member = false;
  }
  return out;
}

}  // namespace ojapca
