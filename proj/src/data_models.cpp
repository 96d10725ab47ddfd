#include "ojapca/data_models.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

#include <boost/math/tools/roots.hpp>

namespace ojapca {

namespace {

// Purpose tags for sub-stream keys.
constexpr std::uint64_t kGrassmannTag = 0x4752415353ULL;
constexpr std::uint64_t kRotationTag = 0x524f54ULL;

}  // namespace

Spectrum::Spectrum(VectorXd lambdas, Index p) : lambdas_(std::move(lambdas)), p_(p) {
  const Index d = lambdas_.size();
  if (p_ < 1 || p_ >= d) {
    throw Error(Errc::invalid_argument, "spectrum needs 1 <= p < d (p=" + std::to_string(p_) +
                                            ", d=" + std::to_string(d) + ")");
  }
  if (!lambdas_.allFinite() || !(lambdas_(d - 1) > 0)) {
    throw Error(Errc::invalid_argument, "eigenvalues must be finite and positive");
  }
  for (Index i = 1; i < d; ++i) {
    if (lambdas_(i) > lambdas_(i - 1)) throw Error(Errc::invalid_argument, "eigenvalues must be non-increasing");
  }
  if (!(lambdas_(p_ - 1) > lambdas_(p_))) {
    throw Error(Errc::no_gap, "lambda_p == lambda_{p+1} at p=" + std::to_string(p_));
  }
}

Spectrum Spectrum::scaled(double factor) const {
  if (!(factor > 0) || !std::isfinite(factor)) throw Error(Errc::invalid_argument, "scale factor must be positive");
  return Spectrum(lambdas_ * factor, p_);
}

std::string_view to_string(SpectrumSpec::Kind kind) {
  switch (kind) {
    case SpectrumSpec::Kind::two_block: return "two_block";
    case SpectrumSpec::Kind::geometric: return "geometric";
    case SpectrumSpec::Kind::linear: return "linear";
  }
  return "two_block";
}

SpectrumSpec::Kind parse_spectrum_kind(std::string_view name) {
  if (name == "two_block") return SpectrumSpec::Kind::two_block;
  if (name == "geometric") return SpectrumSpec::Kind::geometric;
  if (name == "linear") return SpectrumSpec::Kind::linear;
  throw Error(Errc::invalid_argument, "unknown spectrum kind '" + std::string(name) + "'");
}

Spectrum make_spectrum(const SpectrumSpec& spec, Index d, Index p) {
  if (d < 2) throw Error(Errc::invalid_argument, "spectrum needs d >= 2");
  VectorXd lambdas(d);
  switch (spec.kind) {
    case SpectrumSpec::Kind::two_block:
      for (Index i = 0; i < d; ++i) lambdas(i) = i < p ? spec.first : spec.second;
      break;
    case SpectrumSpec::Kind::geometric:
      if (!(spec.second > 0) || spec.second > 1) throw Error(Errc::invalid_argument, "geometric ratio must lie in (0, 1]");
      for (Index i = 0; i < d; ++i) lambdas(i) = spec.first * std::pow(spec.second, double(i));
      break;
    case SpectrumSpec::Kind::linear:
      for (Index i = 0; i < d; ++i) lambdas(i) = spec.first + (spec.second - spec.first) * double(i) / double(d - 1);
      break;
  }
  return Spectrum(std::move(lambdas), p);
}

std::string_view to_string(Family family) {
  switch (family) {
    case Family::gaussian: return "gaussian";
    case Family::rademacher: return "rademacher";
    case Family::uniform_scaled: return "uniform_scaled";
  }
  return "gaussian";
}

Family parse_family(std::string_view name) {
  if (name == "gaussian") return Family::gaussian;
  if (name == "rademacher") return Family::rademacher;
  if (name == "uniform_scaled") return Family::uniform_scaled;
  throw Error(Errc::invalid_argument, "unknown family '" + std::string(name) + "'");
}

namespace {

// E exp(xi^2 / v^2) for xi uniform on [-sqrt3, sqrt3] equals
// int_0^1 exp(a u^2) du with a = 3 / v^2 = sum_k a^k / (k! (2k + 1)).
double uniform_orlicz_moment(double v) {
  const double a = 3.0 / (v * v);
  double term = 1.0;  // a^k / k!
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    term *= a / k;
    const double contribution = term / (2.0 * k + 1.0);
    sum += contribution;
    if (contribution < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace

double psi_of_family(Family family) {
  switch (family) {
    case Family::gaussian:
      // (1 - 2/v^2)^{-1/2} = 2
      return std::sqrt(8.0 / 3.0);
    case Family::rademacher:
      // exp(1/v^2) = 2
      return 1.0 / std::sqrt(std::numbers::ln2);
    case Family::uniform_scaled: {
      auto f = [](double v) { return uniform_orlicz_moment(v) - 2.0; };
      boost::uintmax_t max_iter = 200;
      const auto [lo, hi] = boost::math::tools::toms748_solve(f, 1.0, 1.7, boost::math::tools::eps_tolerance<double>(52),
                                                              max_iter);
      return 0.5 * (lo + hi);
    }
  }
  return 0.0;
}

MatrixXd random_orthogonal(Index d, std::uint64_t seed) {
  rng::Cursor cursor(rng::derive_key(seed, kRotationTag));
  MatrixXd g(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) g(i, j) = cursor.normal();
  return orthonormalize(g).matrix();
}

CovarianceModel::CovarianceModel(Spectrum spectrum, Family family)
    : spectrum_(std::move(spectrum)), family_(family), identity_(true), sqrt_lambdas_(spectrum_.lambdas().cwiseSqrt()) {}

CovarianceModel::CovarianceModel(Spectrum spectrum, Family family, MatrixXd rotation)
    : spectrum_(std::move(spectrum)),
      family_(family),
      identity_(false),
      rotation_(std::move(rotation)),
      sqrt_lambdas_(spectrum_.lambdas().cwiseSqrt()) {
  const Index d = spectrum_.d();
  if (rotation_.rows() != d || rotation_.cols() != d) {
    throw Error(Errc::dimension_mismatch, "rotation must be d x d");
  }
  if (!(orthonormality_error(rotation_) <= 1e-10)) throw Error(Errc::invalid_argument, "rotation is not orthogonal");
}

MatrixXd CovarianceModel::rotation() const {
  return identity_ ? MatrixXd::Identity(d(), d()) : rotation_;
}

MatrixXd CovarianceModel::covariance() const {
  const MatrixXd r = rotation();
  return r * spectrum_.lambdas().asDiagonal() * r.transpose();
}

BasisMatrix CovarianceModel::principal_basis() const {
  return BasisMatrix(rotation().leftCols(spectrum_.p()));
}

void CovarianceModel::transform(const VectorXd& xi, VectorXd& out) const {
  if (identity_) {
    out = sqrt_lambdas_.cwiseProduct(xi);
  } else {
    out.noalias() = rotation_ * sqrt_lambdas_.cwiseProduct(xi);
  }
}

void CovarianceModel::to_eigen_coordinates(const Eigen::Ref<const VectorXd>& x, VectorXd& out) const {
  if (identity_) {
    out = x;
  } else {
    out.noalias() = rotation_.transpose() * x;
  }
}

SampleStream::SampleStream(std::shared_ptr<const CovarianceModel> model, std::uint64_t seed)
    : model_(std::move(model)), seed_(seed), xi_(model_ ? model_->d() : 0) {
  if (!model_) throw Error(Errc::invalid_argument, "sample stream needs a model");
}

void SampleStream::standardized(std::uint64_t k, VectorXd& xi) const {
  const Index d = model_->d();
  xi.resize(d);
  const std::uint64_t base = k * static_cast<std::uint64_t>(d);
  switch (model_->family()) {
    case Family::gaussian:
      for (Index j = 0; j < d; ++j) xi(j) = rng::standard_normal(seed_, base + j);
      break;
    case Family::rademacher:
      for (Index j = 0; j < d; ++j) xi(j) = rng::rademacher(seed_, base + j);
      break;
    case Family::uniform_scaled:
      for (Index j = 0; j < d; ++j) xi(j) = rng::uniform_unit_variance(seed_, base + j);
      break;
  }
}

void SampleStream::draw_into(VectorXd& out) {
  standardized(counter_++, xi_);
  model_->transform(xi_, out);
}

VectorXd SampleStream::draw() {
  VectorXd out(d());
  draw_into(out);
  return out;
}

BasisMatrix grassmann_uniform(Index d, Index p, std::uint64_t seed) {
  if (p < 1 || p > d) throw Error(Errc::invalid_argument, "grassmann_uniform needs 1 <= p <= d");
  rng::Cursor cursor(rng::derive_key(seed, kGrassmannTag));
  MatrixXd g(d, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < d; ++i) g(i, j) = cursor.normal();
  return orthonormalize(g);
}

TailEstimate initial_tail_estimate(Index d, Index p, double kappa, std::int64_t n_samples, std::uint64_t seed) {
  if (n_samples < 100) throw Error(Errc::invalid_argument, "initial_tail_estimate needs at least 100 samples");
  if (!(kappa > 1)) throw Error(Errc::invalid_argument, "kappa must exceed 1");
  std::int64_t outside = 0;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const BasisMatrix v = grassmann_uniform(d, p, rng::derive_key(seed, static_cast<std::uint64_t>(i)));
    if (!sphere_membership(v.matrix(), kappa).member) ++outside;
  }
  TailEstimate out;
  out.samples = n_samples;
  out.probability = double(outside) / double(n_samples);
  out.half_width = 1.96 * std::sqrt(out.probability * (1.0 - out.probability) / double(n_samples));
  return out;
}

}  // namespace ojapca
