#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "ojapca/geometry.hpp"
#include "ojapca/rng.hpp"

namespace ojapca {

/// Eigenvalue ladder lambda_1 >= ... >= lambda_d > 0 with a strict gap at p.
class Spectrum {
 public:
  Spectrum(VectorXd lambdas, Index p);

  const VectorXd& lambdas() const noexcept { return lambdas_; }
  Index d() const noexcept { return lambdas_.size(); }
  Index p() const noexcept { return p_; }

  /// lambda_i with the 1-based index used in the formulas.
  double lambda(Index i) const { return lambdas_(i - 1); }
  double gamma() const noexcept { return lambdas_(p_ - 1) - lambdas_(p_); }
  /// Sum of the top i eigenvalues.
  double eta(Index i) const { return lambdas_.head(i).sum(); }
  /// eta(i) / eta(d), in [i/d, 1].
  double mu(Index i) const { return eta(i) / eta(d()); }
  double nu() const { return 1.0 / mu(p_); }

  /// Spectrum of xi * X, i.e. every eigenvalue times factor = xi^2.
  Spectrum scaled(double factor) const;

 private:
  VectorXd lambdas_;
  Index p_;
};

struct SpectrumSpec {
  enum class Kind { two_block, geometric, linear };
  Kind kind{Kind::two_block};
  /// two_block: (lambda_top, lambda_tail); geometric: (lambda_1, ratio);
  /// linear: (lambda_1, lambda_d).
  double first{2.0};
  double second{1.0};
};

std::string_view to_string(SpectrumSpec::Kind kind);
SpectrumSpec::Kind parse_spectrum_kind(std::string_view name);

/// Throws NoGap when the family does not separate lambda_p from lambda_{p+1}.
Spectrum make_spectrum(const SpectrumSpec& spec, Index d, Index p);

enum class Family { gaussian, rademacher, uniform_scaled };

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

/// psi_2 Orlicz norm of one standardized coordinate of the family.
double psi_of_family(Family family);

/// Haar-distributed d x d orthogonal matrix.
MatrixXd random_orthogonal(Index d, std::uint64_t seed);

/// Population model X = R diag(lambda)^{1/2} xi with xi i.i.d. unit variance.
class CovarianceModel {
 public:
  /// Diagonal canonical form (R = I).
  CovarianceModel(Spectrum spectrum, Family family);
  /// Rotated model; R must be orthogonal to 1e-10.
  CovarianceModel(Spectrum spectrum, Family family, MatrixXd rotation);

  const Spectrum& spectrum() const noexcept { return spectrum_; }
  Family family() const noexcept { return family_; }
  bool has_identity_rotation() const noexcept { return identity_; }
  /// Materialized rotation (identity when none was given).
  MatrixXd rotation() const;
  MatrixXd covariance() const;
  /// U_*: the first p columns of the rotation.
  BasisMatrix principal_basis() const;

  Index d() const noexcept { return spectrum_.d(); }

  /// X from the standardized coordinates xi; `out` is resized to d.
  void transform(const VectorXd& xi, VectorXd& out) const;
  /// Eigen-coordinates Y = R^T x.
  void to_eigen_coordinates(const Eigen::Ref<const VectorXd>& x, VectorXd& out) const;

 private:
  Spectrum spectrum_;
  Family family_;
  bool identity_;
  MatrixXd rotation_;
  VectorXd sqrt_lambdas_;
};

/// Seeded i.i.d. sample source. Draw k is a pure function of (seed, k).
class SampleStream {
 public:
  SampleStream(std::shared_ptr<const CovarianceModel> model, std::uint64_t seed);

  const CovarianceModel& model() const noexcept { return *model_; }
  std::shared_ptr<const CovarianceModel> shared_model() const noexcept { return model_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }
  Index d() const noexcept { return model_->d(); }

  VectorXd draw();
  /// Allocation-free draw into a preallocated vector of length d.
  void draw_into(VectorXd& out);
  /// Standardized coordinates of draw number k (no state change).
  void standardized(std::uint64_t k, VectorXd& xi) const;

  SampleStream clone_with_seed(std::uint64_t seed) const { return SampleStream(model_, seed); }
  void rewind() noexcept { counter_ = 0; }

 private:
  std::shared_ptr<const CovarianceModel> model_;
  std::uint64_t seed_;
  std::uint64_t counter_{0};
  VectorXd xi_;
};

/// Uniformly distributed point of the Grassmannian G_p(R^d).
BasisMatrix grassmann_uniform(Index d, Index p, std::uint64_t seed);

struct TailEstimate {
  double probability{0};
  /// 95% normal-approximation binomial half-width.
  double half_width{0};
  std::int64_t samples{0};
};

/// Monte Carlo estimate of P(V0 not in S(kappa)) for V0 uniform on G_p(R^d).
TailEstimate initial_tail_estimate(Index d, Index p, double kappa, std::int64_t n_samples, std::uint64_t seed);

}  // namespace ojapca
