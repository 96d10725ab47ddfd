#include "ojapca/selftest.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "ojapca/batch.hpp"
#include "ojapca/bounds.hpp"
#include "ojapca/oja.hpp"

namespace ojapca {

namespace {

struct Check {
  bool ok{true};
  std::ostringstream detail;

  void expect(bool condition, const std::string& what) {
    if (!condition && ok) detail << what;
    ok = ok && condition;
  }
};

MatrixXd gaussian_matrix(Index rows, Index cols, rng::Cursor& cursor) {
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = cursor.normal();
  return m;
}

void closed_form_update(Check& c) {
  rng::Cursor cursor(0x5e1f);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const Index d = 2 + Index(cursor.uniform() * 19);
    const Index p = 1 + Index(cursor.uniform() * double(std::min<Index>(5, d - 1)));
    const BasisMatrix v = orthonormalize(gaussian_matrix(d, p, cursor));
    const VectorXd y = gaussian_matrix(d, 1, cursor);
    const double beta = std::pow(10.0, -3.0 + 3.0 * cursor.uniform());
    const MatrixXd w = v.matrix() + beta * y * (y.transpose() * v.matrix());
    const MatrixXd oracle = w * inverse_sqrt_gram(w);
    worst = std::max(worst, (rank_one_update(v, y, beta).matrix() - oracle).cwiseAbs().maxCoeff());
  }
  c.expect(worst <= 1e-10, "max deviation " + std::to_string(worst));
}

void orthonormality(Check& c) {
  auto model = std::make_shared<const CovarianceModel>(make_spectrum({}, 30, 3), Family::gaussian);
  SampleStream stream(model, 11);
  StepConfig cfg;
  cfg.beta = 1e-3;
  cfg.reorth_check_interval = 0;
  const RunRecord run = run_stream(grassmann_uniform(30, 3, 12), stream, 20000, cfg);
  const double drift = orthonormality_error(run.final_state.matrix());
  c.expect(drift <= 1e-8, "drift " + std::to_string(drift));
}

void canonical_angle_basics(Check& c) {
  const BasisMatrix e1(MatrixXd::Identity(3, 1));
  MatrixXd e2m = MatrixXd::Zero(3, 1);
  e2m(1, 0) = 1;
  const BasisMatrix e2(e2m);
  c.expect(canonical_angles(e1, e1).maxCoeff() <= 1e-12, "self angle not zero");
  c.expect(std::abs(canonical_angles(e1, e2)(0) - std::numbers::pi / 2) <= 1e-12, "orthogonal angle not pi/2");
  c.expect(tan_theta_norm(e1, e2, Norm::frobenius).unbounded, "orthogonal tan not unbounded");

  rng::Cursor cursor(0x7a17);
  const BasisMatrix x = orthonormalize(gaussian_matrix(8, 3, cursor));
  const BasisMatrix ref(MatrixXd::Identity(8, 3));
  const VectorXd angles = canonical_angles(x, ref);
  const double via_angles = angles.array().tan().matrix().norm();
  const double via_t = tan_theta_norm_vs_reference(x.matrix(), Norm::frobenius);
  c.expect(std::abs(via_angles - via_t) <= 1e-10 * std::max(1.0, via_t), "T(X) and arccos disagree");
}

void bound_spot_values(Check& c) {
  c.expect(step_count_N_s(1.0, 0.1, 0.5) == 45, "N_1(0.1, 0.5) != 45");
  c.expect(segment_count_M(0.1) == 3, "M(0.1) != 3");
  const ExplicitConstants caps = explicit_constant_caps();
  const double shown[] = {4.298, 3.987, 26.471, 0.038, 5.618, 342.464};
  const double got[] = {caps.C_V, caps.C_Delta, caps.C_T, caps.C_kappa, caps.C_nu, caps.C_circ};
  for (int i = 0; i < 6; ++i) c.expect(std::abs(got[i] - shown[i]) < 5e-4, "constant cap " + std::to_string(i));
  const Spectrum s(VectorXd::LinSpaced(6, 6.0, 1.0), 2);
  const double beta = 0.05;
  c.expect(std::abs(contraction_factor(s, beta) - (1 - beta * s.gamma())) <= 1e-14, "contraction factor");
  const VarphiValue v = varphi(s);
  c.expect(v.lo <= v.value && v.value <= v.hi, "varphi outside its interval");
}

void batch_recovery(Check& c) {
  EmpiricalCovariance<double> acc(3);
  acc.accumulate(VectorXd::Unit(3, 0));
  acc.accumulate(VectorXd::Unit(3, 0));
  acc.accumulate(VectorXd::Unit(3, 1));
  const MatrixXd expected = (VectorXd(3) << 2.0 / 3, 1.0 / 3, 0).finished().asDiagonal();
  c.expect((acc.covariance() - expected).cwiseAbs().maxCoeff() <= 1e-15, "covariance of {e1, e1, e2}");
  const BasisMatrix top = top_p_subspace(acc, 1);
  c.expect(sin_theta_norm(top, BasisMatrix(MatrixXd::Identity(3, 1)), Norm::frobenius) <= 1e-10, "top eigvector");
}

void scaling(Check& c) {
  auto model = std::make_shared<const CovarianceModel>(make_spectrum({}, 10, 2), Family::gaussian);
  SampleStream stream(model, 5);
  const BasisMatrix start = grassmann_uniform(10, 2, 6);
  StepConfig cfg;
  cfg.beta = 0.01;
  cfg.reorth_check_interval = 0;
  OjaState plain(start, cfg);
  std::optional<OjaState> scaled;
  for (int n = 0; n < 1000; ++n) {
    const VectorXd x = stream.draw();
    auto [sx, scfg] = apply_scaling(x, 10.0, cfg);
    if (!scaled) scaled.emplace(start, scfg);
    plain.advance(x);
    scaled->advance(sx);
  }
  const double diff = (plain.matrix() - scaled->matrix()).cwiseAbs().maxCoeff();
  c.expect(diff <= 1e-8, "scaled iterates differ by " + std::to_string(diff));
}

}  // namespace

std::vector<SelftestCase> run_selftest() {
  const std::pair<const char*, void (*)(Check&)> suites[] = {
      {"closed_form_update_matches_polar_oracle", closed_form_update},
      {"orthonormality_without_reorthonormalization", orthonormality},
      {"canonical_angle_basics", canonical_angle_basics},
      {"bound_spot_values", bound_spot_values},
      {"batch_recovery", batch_recovery},
      {"scaling_invariance", scaling},
  };
  std::vector<SelftestCase> out;
  for (const auto& [name, fn] : suites) {
    SelftestCase result;
    result.name = name;
    const auto start = std::chrono::steady_clock::now();
    Check check;
    try {
      fn(check);
      result.passed = check.ok;
      result.detail = check.detail.str();
    } catch (const std::exception& e) {
      result.detail = std::string("threw: ") + e.what();
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(result));
  }
  return out;
}

bool report_selftest(const std::vector<SelftestCase>& cases, std::ostream& out) {
  bool all = true;
  for (const SelftestCase& c : cases) {
    all = all && c.passed;
    out << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(48) << c.name << std::fixed << std::setprecision(3)
        << c.seconds << "s";
    if (!c.passed) out << "  " << c.detail;
    out << '\n';
  }
  return all;
}

}  // namespace ojapca
