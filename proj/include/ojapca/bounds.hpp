#pragma once

// Closed-form quantities of the finite-sample analysis: the variance
// functional varphi(p,d;Lambda), the effective noise variance and minimax
// floor, the step counts N_s and M(eps), the explicit constants C_V ... C_o,
// the three bound expressions, and the hypothesis checks that accompany them.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ojapca/data_models.hpp"

namespace ojapca {

struct VarphiValue {
  double value{0};
  double lo{0};
  double hi{0};
  /// False when lambda_1 == lambda_d makes the lower end 0/0.
  bool interval_finite{true};
};

/// sum_{j<=p<i} lambda_j lambda_i / (lambda_j - lambda_i) and its enclosing
/// interval.
VarphiValue varphi(const Spectrum& spectrum);

/// lambda_1 lambda_{p+1} / gamma^2.
double effective_noise_variance(const Spectrum& spectrum);

/// c p (d - p) sigma_*^2 / n.
double minimax_lower_bound(std::int64_t p, std::int64_t d, double sigma_star_sq, std::int64_t n, double c = 1.0);

/// Smallest n with (1 - beta gamma)^n <= beta^s.
std::int64_t step_count_N_s(double s, double beta, double gamma);

/// 2 + ceil(log2((1/2 - 3 eps) / eps)), for eps in (0, 1/7).
std::int64_t segment_count_M(double eps);

struct ExplicitConstants {
  double C_V{0};
  double C_Delta{0};
  double C_T{0};
  double C_kappa{0};
  double C_nu{0};
  double C_circ{0};
};

/// Pointwise constants for a = nu eta~_p beta and b = eta~_p beta, with
/// 0 <= b <= a <= sqrt(2) - 1 (throws OutOfRegime otherwise).
ExplicitConstants explicit_constants(double a, double b, double beta, double eps);

/// The same expressions without the regime check.
ExplicitConstants explicit_constants_unchecked(double a, double b, double beta, double eps);

/// Uniform upper bounds of the six constants over the admissible regime
/// (0 <= b <= a <= sqrt(2) - 1, 0 < beta < 1).
ExplicitConstants explicit_constant_caps();

/// Largest entry of the (d-p) x p matrix 1 + beta lambda_{p+i} - beta lambda_j,
/// which equals 1 - beta gamma.
double contraction_factor(const Spectrum& spectrum, double beta);

struct BoundInputs {
  Spectrum spectrum;
  double beta{0};
  double eps{0.1};
  double kappa{10};
  /// Initial tangent bound: ||tan Theta(U0, U_*)||_2^2 <= phi^2 d - 1.
  double phi{1};
  double psi{1};
  /// Random-initialization constants; both needed for the second bound.
  std::optional<double> c_p;
  std::optional<double> delta;
};

/// Three terms of the first bound: transient + variance + higher order.
double thm1_bound(const BoundInputs& in, std::int64_t n);
/// First bound with p C_p^2 delta^{-2} d in place of p phi^2 d.
double thm2_bound(const BoundInputs& in, std::int64_t n);
/// 24 psi^4 varphi / gamma * ln(N) / N.
double thm3_bound(double psi, double varphi_value, double gamma, std::int64_t n_star);

struct BoundCurves {
  std::vector<std::int64_t> n;
  std::vector<double> thm1;
  std::vector<double> thm2;  // empty without C_p and delta
  std::vector<double> thm3;
  /// True when the pointwise C_o was evaluated inside its regime.
  bool c_circ_in_regime{true};
};

BoundCurves thm_bounds(const BoundInputs& in, const std::vector<std::int64_t>& n_grid);

struct HypothesisCondition {
  std::string name;
  bool holds{false};
  /// slack >= 0 exactly when the condition holds.
  double slack{0};
};

struct HypothesisReport {
  std::vector<HypothesisCondition> conditions;
  bool all_hold{false};

  const HypothesisCondition* find(const std::string& name) const;
};

struct HypothesisInputs {
  Spectrum spectrum;
  double beta{0};
  double eps{0.1};
  double omega{0.5};
  double kappa{10};
  double phi{1};
  /// Horizon K (number of steps).
  std::int64_t horizon{0};
  std::optional<double> delta;
};

HypothesisReport check_hypotheses(const HypothesisInputs& in);

struct BoundReport {
  VarphiValue varphi;
  double sigma_star_sq{0};
  double minimax_c{1};
  double psi{0};
  std::vector<std::int64_t> n_grid;
  std::vector<double> minimax;
  std::vector<double> thm1;
  std::vector<double> thm2;
  std::vector<double> thm3;
  bool c_circ_in_regime{true};
  /// (s, N_s) for s in {1/2, 1, 3/2, 2, 3/2 - 37 eps/4}; empty if beta gamma >= 1.
  std::vector<std::pair<double, std::int64_t>> n_s;
  std::optional<std::int64_t> m_eps;
  std::optional<double> beta_star;
  std::optional<double> rho_L;
  std::optional<ExplicitConstants> constants;
  ExplicitConstants constant_caps;
};

struct BoundReportRequest {
  BoundInputs inputs;
  std::vector<std::int64_t> n_grid;
  double minimax_c{1};
  /// Budget for beta_* when the stepsize rule is budget-driven.
  std::optional<std::int64_t> n_star;
};

BoundReport make_bound_report(const BoundReportRequest& request);

}  // namespace ojapca
