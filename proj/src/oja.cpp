#include "ojapca/oja.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ojapca {

OjaState::OjaState(BasisMatrix initial, StepConfig config)
    : u_(initial.matrix()), config_(config), z_(u_.cols()), w_(u_.rows()) {
  if (!(config_.beta > 0) || !std::isfinite(config_.beta)) throw Error(Errc::invalid_argument, "beta must be positive");
  if (!(config_.zero_z_tolerance >= 0)) throw Error(Errc::invalid_argument, "zero_z_tolerance must be >= 0");
}

void OjaState::attach_diagnostics(DiagnosticsContext context) {
  if (context.reference.ambient_dim() != u_.rows() || context.reference.dim() != u_.cols()) {
    throw Error(Errc::shape_mismatch, "diagnostics reference must match the iterate shape");
  }
  if (!(context.kappa > 1)) throw Error(Errc::invalid_argument, "kappa must exceed 1");
  if (!(context.eps > 0)) throw Error(Errc::invalid_argument, "eps must be positive");
  if (context.model) {
    const Spectrum& spectrum = context.model->spectrum();
    if (spectrum.d() != u_.rows()) throw Error(Errc::dimension_mismatch, "model dimension differs from d");
    // |Y_i| <= (lambda_i beta^{-2 eps})^{1/2}, ||Z|| <= (eta_p beta^{-2 eps})^{1/2}
    const double inflation = std::pow(config_.beta, -context.eps);
    coordinate_caps_ = spectrum.lambdas().cwiseSqrt() * inflation;
    z_cap_ = std::sqrt(spectrum.eta(u_.cols())) * inflation;
    y_.resize(u_.rows());
  }
  context_ = std::move(context);
}

void OjaState::advance(const Eigen::Ref<const VectorXd>& x) {
  if (x.size() != u_.rows()) {
    throw Error(Errc::dimension_mismatch,
                "sample has length " + std::to_string(x.size()) + ", expected " + std::to_string(u_.rows()));
  }
  if (!x.allFinite()) throw Error(Errc::non_finite, "sample has non-finite entries");

  detail::rank_one_update_inplace(u_, x, config_.beta, config_.zero_z_tolerance, z_, w_);
  ++step_;

  if (context_ && context_->model && !diagnostics_.quasi_bounded_violation) {
    context_->model->to_eigen_coordinates(x, y_);
    const bool bounded = (y_.cwiseAbs().array() <= coordinate_caps_.array()).all() && z_.norm() <= z_cap_;
    if (!bounded) diagnostics_.quasi_bounded_violation = step_;
  }

  if (config_.reorth_check_interval > 0 && step_ % config_.reorth_check_interval == 0) {
    if (orthonormality_error(u_) > config_.reorth_drift_tolerance) {
      u_ = u_ * inverse_sqrt_gram(u_);
      ++diagnostics_.reorthonormalization_count;
    }
  }

  if (context_) update_diagnostics();
}

void OjaState::update_diagnostics() {
  if (diagnostics_.first_sphere_exit && diagnostics_.first_sphere_entry) return;
  // Top block of the iterate in eigen-coordinates.
  const MatrixXd top = context_->reference.matrix().transpose() * u_;
  const double sigma_min = Eigen::JacobiSVD<MatrixXd>(top).singularValues()(top.cols() - 1);
  const bool member = sigma_min >= 1.0 / context_->kappa;
  if (member && !diagnostics_.first_sphere_entry) diagnostics_.first_sphere_entry = step_;
  if (!member && !diagnostics_.first_sphere_exit) diagnostics_.first_sphere_exit = step_;
}

OjaState oja_step(OjaState state, const Eigen::Ref<const VectorXd>& x) {
  state.advance(x);
  return state;
}

ErrorSnapshot measure_error(const BasisMatrix& U, const BasisMatrix& reference, std::int64_t n) {
  const VectorXd angles = canonical_angles(U, reference);
  ErrorSnapshot out;
  out.n = n;
  out.sin_f2 = angles.array().sin().square().sum();
  const TanThetaNorm<double> t = tan_theta_norm(U, reference, Norm::frobenius);
  out.tan_f2 = t.unbounded ? t : TanThetaNorm<double>{t.value * t.value, false};
  return out;
}

RunRecord run_stream(const BasisMatrix& initial, SampleStream& stream, std::int64_t n_steps, const StepConfig& config,
                     const RunOptions& options) {
  if (stream.d() != initial.ambient_dim()) throw Error(Errc::dimension_mismatch, "stream dimension differs from d");
  if (n_steps < 0) throw Error(Errc::invalid_argument, "n_steps must be >= 0");
  const auto& record_at = options.record_at;
  if (!std::is_sorted(record_at.begin(), record_at.end()) ||
      (!record_at.empty() && (record_at.front() < 1 || record_at.back() > n_steps))) {
    throw Error(Errc::invalid_argument, "record_at must be sorted within [1, n_steps]");
  }
  if (!record_at.empty() && !options.reference) {
    throw Error(Errc::invalid_argument, "snapshots need a reference basis");
  }

  RunRecord record{std::nullopt, {}, OjaState(initial, config)};
  OjaState& state = record.final_state;
  if (options.diagnostics) state.attach_diagnostics(*options.diagnostics);
  if (options.reference) record.initial = measure_error(initial, *options.reference, 0);
  record.snapshots.reserve(record_at.size());

  VectorXd x(stream.d());
  auto next = record_at.begin();
  for (std::int64_t n = 1; n <= n_steps; ++n) {
    stream.draw_into(x);
    state.advance(x);
    while (next != record_at.end() && *next == n) {
      record.snapshots.push_back(measure_error(state.basis(), *options.reference, n));
      ++next;
    }
  }
  return record;
}

double optimal_stepsize(std::int64_t n_star, double gamma) {
  if (n_star < 2) throw Error(Errc::invalid_argument, "N_* must be at least 2");
  if (!(gamma > 0) || !std::isfinite(gamma)) throw Error(Errc::invalid_argument, "gamma must be positive");
  const double n = static_cast<double>(n_star);
  return 3.0 * std::log(n) / (2.0 * gamma * n);
}

std::pair<VectorXd, StepConfig> apply_scaling(const VectorXd& x, double xi, const StepConfig& config) {
  if (!(xi > 0) || !std::isfinite(xi)) throw Error(Errc::invalid_argument, "xi must be positive and finite");
  StepConfig scaled = config;
  scaled.beta = config.beta / (xi * xi);
  return {xi * x, scaled};
}

}  // namespace ojapca
