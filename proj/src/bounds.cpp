#include "ojapca/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ojapca/oja.hpp"

namespace ojapca {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

// Slack for a strict inequality "gap > 0": a zero gap must read as violated.
double strict_slack(double gap) {
  return gap == 0.0 ? -std::numeric_limits<double>::denorm_min() : gap;
}

// Placeholder slack when a condition cannot be evaluated at all.
constexpr double kUnevaluable = -1.0;

}  // namespace

VarphiValue varphi(const Spectrum& spectrum) {
  const Index d = spectrum.d();
  const Index p = spectrum.p();
  const auto& l = spectrum.lambdas();
  VarphiValue out;
  for (Index j = 0; j < p; ++j)
    for (Index i = p; i < d; ++i) out.value += l(j) * l(i) / (l(j) - l(i));
  const double pairs = double(p) * double(d - p);
  const double spread = l(0) - l(d - 1);
  out.interval_finite = spread > 0;
  out.lo = out.interval_finite ? pairs * l(0) * l(d - 1) / spread : out.value;
  out.hi = pairs * l(p - 1) * l(p) / spectrum.gamma();
  return out;
}

double effective_noise_variance(const Spectrum& spectrum) {
  const double gamma = spectrum.gamma();
  return spectrum.lambda(1) * spectrum.lambda(spectrum.p() + 1) / (gamma * gamma);
}

double minimax_lower_bound(std::int64_t p, std::int64_t d, double sigma_star_sq, std::int64_t n, double c) {
  if (n < 1) throw Error(Errc::invalid_argument, "n must be >= 1");
  if (p < 1 || p > d) throw Error(Errc::invalid_argument, "need 1 <= p <= d");
  return c * double(p) * double(d - p) * sigma_star_sq / double(n);
}

std::int64_t step_count_N_s(double s, double beta, double gamma) {
  if (!(s > 0) || !(beta > 0) || !(beta < 1) || !(gamma > 0) || !(beta * gamma < 1)) {
    throw Error(Errc::invalid_argument, "N_s needs s > 0, 0 < beta < 1 and 0 < beta gamma < 1");
  }
  const double log_rate = std::log1p(-beta * gamma);
  const double target = s * std::log(beta);
  const double raw = std::ceil(target / log_rate);
  // Past 2^53 neighbouring integers are indistinguishable in double, so the
  // repair below cannot move; saturate instead of overflowing.
  if (raw >= 0x1p53) {
    return raw >= 0x1p63 ? std::numeric_limits<std::int64_t>::max() : static_cast<std::int64_t>(raw);
  }
  auto n = static_cast<std::int64_t>(raw);
  // Repair rounding at the boundary so the defining inequality holds exactly.
  while (double(n) * log_rate > target) ++n;
  while (n > 1 && double(n - 1) * log_rate <= target) --n;
  return std::max<std::int64_t>(n, 1);
}

std::int64_t segment_count_M(double eps) {
  if (!(eps > 0) || !(eps < 1.0 / 7.0)) throw Error(Errc::invalid_argument, "M(eps) needs 0 < eps < 1/7");
  double x = std::log2((0.5 - 3.0 * eps) / eps);
  if (std::abs(x - std::round(x)) < 1e-12) x = std::round(x);
  return 2 + static_cast<std::int64_t>(std::ceil(x));
}

ExplicitConstants explicit_constants_unchecked(double a, double b, double beta, double eps) {
  ExplicitConstants c;
  c.C_V = 2.5 + 3.5 * a + 1.875 * a * a + 0.375 * a * a * a;
  c.C_Delta = 2.0 + 0.5 * a + c.C_V * b;
  c.C_T = c.C_V + 2.0 * c.C_Delta + 2.0 * c.C_Delta * c.C_V * b;
  const double sum = c.C_T + 2.0 * c.C_Delta;
  c.C_kappa = (3.0 - kSqrt2) * c.C_Delta * c.C_Delta / (64.0 * sum * sum);
  c.C_nu = 4.0 * kSqrt2 * c.C_T * c.C_kappa;

  const double k29 = 29.0 + 8.0 * kSqrt2;
  const double t_over_d = c.C_T / c.C_Delta;
  c.C_circ = k29 / (16.0 * (3.0 - kSqrt2)) + 4.0 * t_over_d / (3.0 - kSqrt2) * std::pow(beta, 3.0 * eps) +
             (c.C_T + k29 / 32.0) * std::pow(beta, 0.5 - 3.0 * eps) +
             3.0 * t_over_d * t_over_d / (2.0 * (3.0 - kSqrt2)) * std::pow(beta, 0.5 + 3.0 * eps) +
             2.0 * t_over_d * std::pow(beta, 1.0 - 3.0 * eps) +
             t_over_d * t_over_d / 2.0 * std::pow(beta, 1.5 - 3.0 * eps);
  return c;
}

ExplicitConstants explicit_constants(double a, double b, double beta, double eps) {
  if (!(b >= 0) || !(b <= a) || !(a <= kSqrt2 - 1.0)) {
    throw Error(Errc::out_of_regime, "constants need 0 <= b <= a <= sqrt(2) - 1");
  }
  if (!(beta >= 0) || !(eps >= 0)) throw Error(Errc::invalid_argument, "beta and eps must be non-negative");
  return explicit_constants_unchecked(a, b, beta, eps);
}

ExplicitConstants explicit_constant_caps() {
  // C_V, C_Delta, C_T increase in (a, b): the extremes are the two corners.
  const ExplicitConstants hi = explicit_constants_unchecked(kSqrt2 - 1.0, kSqrt2 - 1.0, 0.0, 0.0);
  const ExplicitConstants lo = explicit_constants_unchecked(0.0, 0.0, 0.0, 0.0);
  ExplicitConstants cap;
  cap.C_V = hi.C_V;
  cap.C_Delta = hi.C_Delta;
  cap.C_T = hi.C_T;
  // (C_T + 2 C_Delta)^2 >= C_T,lo + 2 C_Delta,lo = 10.5 since the sum exceeds 1.
  cap.C_kappa = (3.0 - kSqrt2) * hi.C_Delta * hi.C_Delta / (64.0 * (lo.C_T + 2.0 * lo.C_Delta));
  cap.C_nu = 4.0 * kSqrt2 * hi.C_T * cap.C_kappa;
  // Every beta power is at most 1; C_T/C_Delta is largest at (C_T,hi, C_Delta,lo).
  const double k29 = 29.0 + 8.0 * kSqrt2;
  const double ratio = hi.C_T / lo.C_Delta;
  cap.C_circ = k29 / (16.0 * (3.0 - kSqrt2)) + 4.0 * ratio / (3.0 - kSqrt2) + (hi.C_T + k29 / 32.0) +
               3.0 * ratio * ratio / (2.0 * (3.0 - kSqrt2)) + 2.0 * ratio + ratio * ratio / 2.0;
  return cap;
}

double contraction_factor(const Spectrum& spectrum, double beta) {
  if (!(beta >= 0) || !(beta * spectrum.lambda(1) < 1)) {
    throw Error(Errc::invalid_argument, "contraction factor needs 0 <= beta and beta lambda_1 < 1");
  }
  const Index d = spectrum.d();
  const Index p = spectrum.p();
  const auto& l = spectrum.lambdas();
  MatrixXd entries(d - p, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < d - p; ++i) entries(i, j) = 1.0 + beta * l(p + i) - beta * l(j);
  const double rho = entries.maxCoeff();
  if (std::abs(rho - (1.0 - beta * spectrum.gamma())) > 1e-14) {
    throw std::logic_error("contraction factor differs from 1 - beta gamma");
  }
  return rho;
}

namespace {

double higher_order_term(const BoundInputs& in, bool* in_regime) {
  const Spectrum& s = in.spectrum;
  const Index p = s.p();
  const Index d = s.d();
  const double eta_p = s.eta(p);
  const double eta_tilde = eta_p * std::pow(in.beta, -2.0 * in.eps);
  const double b = eta_tilde * in.beta;
  const double a = s.nu() * b;
  if (in_regime) *in_regime = a <= kSqrt2 - 1.0;
  const double c_circ = explicit_constants_unchecked(a, b, in.beta, in.eps).C_circ;
  const double mu_p = s.mu(p);
  return c_circ * std::pow(in.kappa, 4) / (mu_p * mu_p) * eta_p * eta_p / s.gamma() * double(p) *
         std::sqrt(double(d - p)) * std::pow(in.beta, 1.5 - 7.0 * in.eps);
}

double variance_term(const BoundInputs& in) {
  const double psi2 = in.psi * in.psi;
  return 32.0 * psi2 * psi2 * in.beta / (2.0 - in.spectrum.lambda(1) * in.beta) * varphi(in.spectrum).value;
}

double transient_factor(const BoundInputs& in, std::int64_t n) {
  if (n < 1) throw Error(Errc::invalid_argument, "bounds are stated for n >= 1");
  return std::pow(1.0 - in.beta * in.spectrum.gamma(), 2.0 * double(n - 1));
}

}  // namespace

double thm1_bound(const BoundInputs& in, std::int64_t n) {
  const double p = double(in.spectrum.p());
  const double d = double(in.spectrum.d());
  return transient_factor(in, n) * p * in.phi * in.phi * d + variance_term(in) + higher_order_term(in, nullptr);
}

double thm2_bound(const BoundInputs& in, std::int64_t n) {
  if (!in.c_p || !in.delta) throw Error(Errc::invalid_argument, "second bound needs C_p and delta");
  const double p = double(in.spectrum.p());
  const double d = double(in.spectrum.d());
  const double cp = *in.c_p;
  const double delta = *in.delta;
  return transient_factor(in, n) * p * cp * cp / (delta * delta) * d + variance_term(in) +
         higher_order_term(in, nullptr);
}

double thm3_bound(double psi, double varphi_value, double gamma, std::int64_t n_star) {
  if (n_star < 1) throw Error(Errc::invalid_argument, "N_* must be >= 1");
  if (!(gamma > 0)) throw Error(Errc::no_gap, "gamma must be positive");
  const double psi2 = psi * psi;
  const double n = double(n_star);
  return 24.0 * psi2 * psi2 * varphi_value / gamma * std::log(n) / n;
}

BoundCurves thm_bounds(const BoundInputs& in, const std::vector<std::int64_t>& n_grid) {
  BoundCurves out;
  out.n = n_grid;
  const double vphi = varphi(in.spectrum).value;
  higher_order_term(in, &out.c_circ_in_regime);
  const bool with_thm2 = in.c_p.has_value() && in.delta.has_value();
  for (std::int64_t n : n_grid) {
    out.thm1.push_back(thm1_bound(in, n));
    if (with_thm2) out.thm2.push_back(thm2_bound(in, n));
    out.thm3.push_back(thm3_bound(in.psi, vphi, in.spectrum.gamma(), n));
  }
  return out;
}

const HypothesisCondition* HypothesisReport::find(const std::string& name) const {
  for (const auto& c : conditions)
    if (c.name == name) return &c;
  return nullptr;
}

HypothesisReport check_hypotheses(const HypothesisInputs& in) {
  HypothesisReport report;
  auto add = [&report](std::string name, double slack) {
    report.conditions.push_back({std::move(name), slack >= 0, slack});
  };

  const Spectrum& s = in.spectrum;
  const Index p = s.p();
  const Index d = s.d();
  const double eps = in.eps;
  const double beta = in.beta;
  const double eta_p = s.eta(p);
  const bool eps_ok = eps > 0 && eps < 1.0 / 7.0;

  add("eps_in_(0,1/7)", strict_slack(std::min(eps, 1.0 / 7.0 - eps)));
  add("omega_in_(0,1)", strict_slack(std::min(in.omega, 1.0 - in.omega)));
  add("phi_positive", strict_slack(in.phi));

  if (eps_ok && in.omega > 0) {
    const double m = double(segment_count_M(eps));
    const double inner = std::max(2.0 * std::sqrt(kSqrt2 - 1.0) * in.phi / std::sqrt(s.lambda(1)) * std::sqrt(in.omega),
                                  kSqrt2);
    add("kappa_lower_bound", strict_slack(in.kappa - std::pow(6.0, (m - 1.0) / 2.0) * inner));
  } else {
    add("kappa_lower_bound", kUnevaluable);
  }

  add("beta_positive", strict_slack(beta));
  add("beta_below_1", strict_slack(1.0 - beta));
  if (eps > 0 && 1.0 - 4.0 * eps > 0) {
    const double cap_eta = std::pow(1.0 / (8.0 * in.kappa * eta_p), 2.0 / (1.0 - 4.0 * eps));
    const double cap_gap = std::pow(s.gamma() / (130.0 * in.kappa * in.kappa * eta_p * eta_p), 1.0 / eps);
    add("beta_cap_kappa_eta", strict_slack(cap_eta - beta));
    add("beta_cap_gap", strict_slack(cap_gap - beta));
  } else {
    add("beta_cap_kappa_eta", kUnevaluable);
    add("beta_cap_gap", kUnevaluable);
  }

  add("lambda1_d_beta_omega", in.omega - (kSqrt2 + 1.0) * s.lambda(1) * double(d) * std::pow(beta, 1.0 - 7.0 * eps));

  const double s_horizon = 1.5 - 37.0 * eps / 4.0;
  if (s_horizon > 0 && beta > 0 && beta < 1 && beta * s.gamma() < 1) {
    add("horizon_K", strict_slack(double(in.horizon - step_count_N_s(s_horizon, beta, s.gamma()))));
  } else {
    add("horizon_K", kUnevaluable);
  }

  if (in.delta) {
    const double delta = *in.delta;
    const double upper = std::pow(2.0, -1.0 / double(p * p));
    add("delta_range", strict_slack(std::min(delta, upper - delta)));
    add("d_beta_delta", delta * delta - double(d) * std::pow(beta, 1.0 - 3.0 * eps));
  }
  add("p_below_(d+1)/2", strict_slack((double(d) + 1.0) / 2.0 - double(p)));

  report.all_hold = std::all_of(report.conditions.begin(), report.conditions.end(),
                                [](const HypothesisCondition& c) { return c.holds; });
  return report;
}

BoundReport make_bound_report(const BoundReportRequest& request) {
  const BoundInputs& in = request.inputs;
  const Spectrum& s = in.spectrum;
  BoundReport r;
  r.varphi = varphi(s);
  r.sigma_star_sq = effective_noise_variance(s);
  r.minimax_c = request.minimax_c;
  r.psi = in.psi;
  std::vector<std::int64_t> positive;
  for (std::int64_t n : request.n_grid)
    if (n >= 1) positive.push_back(n);
  const BoundCurves curves = thm_bounds(in, positive);
  r.thm1 = curves.thm1;
  r.thm2 = curves.thm2;
  r.thm3 = curves.thm3;
  r.n_grid = positive;
  for (std::int64_t n : positive) r.minimax.push_back(minimax_lower_bound(s.p(), s.d(), r.sigma_star_sq, n, request.minimax_c));
  r.c_circ_in_regime = curves.c_circ_in_regime;

  const double beta = in.beta;
  if (beta > 0 && beta < 1 && beta * s.gamma() < 1) {
    for (double sv : {0.5, 1.0, 1.5, 2.0, 1.5 - 37.0 * in.eps / 4.0}) {
      if (sv > 0) r.n_s.emplace_back(sv, step_count_N_s(sv, beta, s.gamma()));
    }
  }
  if (in.eps > 0 && in.eps < 1.0 / 7.0) r.m_eps = segment_count_M(in.eps);
  if (request.n_star && *request.n_star >= 2) r.beta_star = optimal_stepsize(*request.n_star, s.gamma());
  if (beta >= 0 && beta * s.lambda(1) < 1) r.rho_L = contraction_factor(s, beta);

  const double b = s.eta(s.p()) * std::pow(beta, -2.0 * in.eps) * beta;
  const double a = s.nu() * b;
  if (a <= kSqrt2 - 1.0) r.constants = explicit_constants(a, b, beta, in.eps);
  r.constant_caps = explicit_constant_caps();
  return r;
}

}  // namespace ojapca
