#pragma once

// Subspace online PCA with a fixed stepsize. Each sample x moves the iterate
// to the orthonormal basis W (W^T W)^{-1/2} of W = (I + beta x x^T) U, using
// the closed form
//
//   Z = U^T x,  alpha = beta (2 + beta x^T x) Z^T Z,  a = (1 + alpha)^{-1/2}
//   U+ = U + beta a x Z^T - (1 - a) / (Z^T Z) U Z Z^T
//
// which costs O(dp) per sample and keeps U+^T U+ = I_p up to rounding.

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "ojapca/data_models.hpp"
#include "ojapca/geometry.hpp"

namespace ojapca {

namespace detail {

/// In-place update of U. On return z holds U_old^T y. Returns false when the
/// degenerate branch ||Z||^2 <= zero_tol ||y||^2 left U untouched.
template <typename DerivedU, typename DerivedY, typename Scalar = typename DerivedU::Scalar>
bool rank_one_update_inplace(Eigen::MatrixBase<DerivedU>& U, const Eigen::MatrixBase<DerivedY>& y, Scalar beta,
                             Scalar zero_tol, Vector<Scalar>& z, Vector<Scalar>& w) {
  z.noalias() = U.transpose() * y;
  const Scalar zz = z.squaredNorm();
  const Scalar yy = y.squaredNorm();
  if (zz <= zero_tol * yy) return false;

  const Scalar growth = beta * (Scalar(2) + beta * yy);
  const Scalar root = std::sqrt(Scalar(1) + growth * zz);
  const Scalar alpha_tilde = Scalar(1) / root;
  // (1 - alpha_tilde) / zz, rewritten so that small alpha does not cancel.
  const Scalar projection = growth / (root * (Scalar(1) + root));

  w.noalias() = U * z;
  w = (beta * alpha_tilde) * y - projection * w;
  U.noalias() += w * z.transpose();
  return true;
}

}  // namespace detail

/// One closed-form step V -> V+ for a single sample y (y need not be unit).
template <typename Scalar, typename DerivedY>
Basis<Scalar> rank_one_update(const Basis<Scalar>& V, const Eigen::MatrixBase<DerivedY>& y, Scalar beta,
                              Scalar zero_tol = Scalar(1e-14)) {
  if (y.size() != V.ambient_dim()) throw Error(Errc::dimension_mismatch, "sample length differs from d");
  if (!y.allFinite() || !std::isfinite(beta)) throw Error(Errc::non_finite, "non-finite sample or stepsize");
  if (!(beta > 0)) throw Error(Errc::invalid_argument, "beta must be positive");
  Matrix<Scalar> u = V.matrix();
  Vector<Scalar> z(V.dim());
  Vector<Scalar> w(V.ambient_dim());
  detail::rank_one_update_inplace(u, y, beta, zero_tol, z, w);
  return Basis<Scalar>(std::move(u), typename Basis<Scalar>::Trusted{});
}

struct StepConfig {
  double beta{0.01};
  /// Degenerate-branch threshold on ||Z||^2 / ||y||^2.
  double zero_z_tolerance{1e-14};
  /// Steps between orthonormality checks; 0 disables the check.
  std::int64_t reorth_check_interval{10000};
  /// Drift max|U^T U - I| above which the basis is re-orthonormalized.
  double reorth_drift_tolerance{1e-8};
};

/// Optional per-step bookkeeping for hitting times of S(kappa) (measured in
/// the eigenbasis, i.e. through U_*^T U) and the quasi-bounded stopping time.
struct DiagnosticsContext {
  double kappa{10.0};
  double eps{0.1};
  /// Principal subspace U_*.
  BasisMatrix reference;
  /// When present, supplies lambda and the rotation for the quasi-bounded test.
  std::shared_ptr<const CovarianceModel> model;
};

struct DiagnosticsRecord {
  std::optional<std::int64_t> first_sphere_exit;
  std::optional<std::int64_t> first_sphere_entry;
  std::optional<std::int64_t> quasi_bounded_violation;
  std::int64_t reorthonormalization_count{0};
};

/// Iterate, step counter, stepsize, and diagnostics of one streaming run.
/// Single owner; movable across threads.
class OjaState {
 public:
  OjaState(BasisMatrix initial, StepConfig config);

  void attach_diagnostics(DiagnosticsContext context);

  /// Consume one sample: closed-form step, then diagnostics and the drift check.
  void advance(const Eigen::Ref<const VectorXd>& x);

  const MatrixXd& matrix() const noexcept { return u_; }
  BasisMatrix basis() const { return BasisMatrix(u_, BasisMatrix::Trusted{}); }
  std::int64_t step() const noexcept { return step_; }
  const StepConfig& config() const noexcept { return config_; }
  const DiagnosticsRecord& diagnostics() const noexcept { return diagnostics_; }

 private:
  void update_diagnostics();

  MatrixXd u_;
  std::int64_t step_{0};
  StepConfig config_;
  DiagnosticsRecord diagnostics_;
  std::optional<DiagnosticsContext> context_;
  VectorXd z_;
  VectorXd w_;
  VectorXd y_;
  VectorXd coordinate_caps_;
  double z_cap_{0};
};

/// Functional form of OjaState::advance.
OjaState oja_step(OjaState state, const Eigen::Ref<const VectorXd>& x);

struct ErrorSnapshot {
  std::int64_t n{0};
  /// ||tan Theta(U, U_*)||_F^2
  TanThetaNorm<double> tan_f2;
  /// ||sin Theta(U, U_*)||_F^2
  double sin_f2{0};
};

ErrorSnapshot measure_error(const BasisMatrix& U, const BasisMatrix& reference, std::int64_t n);

struct RunOptions {
  /// Sorted step indices within [1, n_steps].
  std::vector<std::int64_t> record_at;
  std::optional<BasisMatrix> reference;
  std::optional<DiagnosticsContext> diagnostics;
};

struct RunRecord {
  /// Error of the initial basis, when a reference is attached.
  std::optional<ErrorSnapshot> initial;
  std::vector<ErrorSnapshot> snapshots;
  OjaState final_state;
};

/// Streams n_steps samples through the iteration. No sample is retained.
RunRecord run_stream(const BasisMatrix& initial, SampleStream& stream, std::int64_t n_steps, const StepConfig& config,
                     const RunOptions& options = {});

/// beta_* = 3 ln(N_*) / (2 gamma N_*).
double optimal_stepsize(std::int64_t n_star, double gamma);

/// (xi x, beta / xi^2): the pair that reproduces the unscaled iterates.
std::pair<VectorXd, StepConfig> apply_scaling(const VectorXd& x, double xi, const StepConfig& config);

}  // namespace ojapca
