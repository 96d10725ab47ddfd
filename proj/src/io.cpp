#include "ojapca/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ojapca/config.hpp"

namespace ojapca::io {

using nlohmann::json;

namespace {

std::string field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json nullable(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json doubles(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

void write_run_csv(std::ostream& out, const AggregateResult& result) {
  out << kRunHeader << '\n';
  for (const SnapshotAggregate& r : result.rows) {
    out << r.n << ',' << field(r.mean_tan2) << ',' << field(r.median_tan2) << ',' << field(r.q10_tan2) << ','
        << field(r.q90_tan2) << ',' << format_double(r.mean_sin2) << ',' << r.sentinel_count << ','
        << field(r.bound_thm3) << ',' << format_double(r.minimax_lb) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepHeader << '\n';
  for (const SweepRow& r : rows) {
    out << r.n_star << ',' << format_double(r.beta_star) << ',' << field(r.mean_tan2) << ',' << r.sentinel_count
        << ',' << format_double(r.bound_thm3) << ',' << format_double(r.minimax_lb) << '\n';
  }
}

void write_compare_csv(std::ostream& out, const CompareResult& result) {
  out << kCompareHeader << '\n';
  for (const CompareRow& r : result.rows) {
    out << r.n << ',' << field(r.online_mean_tan2) << ',' << format_double(r.batch_mean_tan2) << ','
        << format_double(r.online_mean_sin2) << ',' << format_double(r.batch_mean_sin2) << '\n';
  }
}

json to_json(const ExplicitConstants& c) {
  return json{{"C_V", number(c.C_V)},         {"C_Delta", number(c.C_Delta)}, {"C_T", number(c.C_T)},
              {"C_kappa", number(c.C_kappa)}, {"C_nu", number(c.C_nu)},       {"C_circ", number(c.C_circ)}};
}

json to_json(const BoundReport& r) {
  json n_s = json::array();
  for (const auto& [s, n] : r.n_s) n_s.push_back({{"s", s}, {"N_s", n}});
  json out{
      {"varphi", {{"value", number(r.varphi.value)},
                  {"lo", number(r.varphi.lo)},
                  {"hi", number(r.varphi.hi)},
                  {"interval_finite", r.varphi.interval_finite}}},
      {"sigma_star_sq", number(r.sigma_star_sq)},
      {"minimax_c", r.minimax_c},
      {"psi", number(r.psi)},
      {"n", r.n_grid},
      {"minimax", doubles(r.minimax)},
      {"thm1", doubles(r.thm1)},
      {"thm2", r.thm2.empty() ? json(nullptr) : doubles(r.thm2)},
      {"thm3", doubles(r.thm3)},
      {"c_circ_in_regime", r.c_circ_in_regime},
      {"N_s", n_s},
      {"M_eps", nullable(r.m_eps)},
      {"beta_star", nullable(r.beta_star)},
      {"rho_L", nullable(r.rho_L)},
      {"constants", r.constants ? to_json(*r.constants) : json(nullptr)},
      {"constant_caps", to_json(r.constant_caps)},
  };
  return out;
}

json to_json(const HypothesisReport& report) {
  json conditions = json::array();
  for (const HypothesisCondition& c : report.conditions) {
    conditions.push_back({{"name", c.name}, {"holds", c.holds}, {"slack", number(c.slack)}});
  }
  return json{{"all_hold", report.all_hold}, {"conditions", conditions}};
}

json to_json(const SnapshotAggregate& r) {
  return json{{"n", r.n},
              {"mean_tan2", nullable(r.mean_tan2)},
              {"median_tan2", nullable(r.median_tan2)},
              {"q10_tan2", nullable(r.q10_tan2)},
              {"q90_tan2", nullable(r.q90_tan2)},
              {"mean_sin2", r.mean_sin2},
              {"sentinel_count", r.sentinel_count},
              {"included_count", r.included_count},
              {"conditional_mean_tan2", nullable(r.conditional_mean_tan2)},
              {"conditional_count", r.conditional_count},
              {"bound_thm1", nullable(r.bound_thm1)},
              {"bound_thm3", nullable(r.bound_thm3)},
              {"minimax_lb", r.minimax_lb}};
}

json run_sidecar(const ExperimentConfig& config, const AggregateResult& result) {
  json rows = json::array();
  for (const SnapshotAggregate& r : result.rows) rows.push_back(to_json(r));
  json histogram = json::object();
  for (const auto& [bin, count] : result.sphere_exit_histogram) histogram[bin < 0 ? "never" : std::to_string(bin)] = count;
  return json{
      {"config", config_to_json(config)},
      {"trials", result.trials},
      {"initial", to_json(result.initial)},
      {"rows", rows},
      {"bounds", result.bound_report ? to_json(*result.bound_report) : json(nullptr)},
      {"hypotheses", result.hypotheses ? to_json(*result.hypotheses) : json(nullptr)},
      {"diagnostics",
       {{"quasi_bounded_violation_fraction", result.quasi_bounded_violation_fraction},
        {"sphere_exit_log2_histogram", histogram},
        {"reorthonormalizations", result.reorthonormalizations}}},
      {"timing", {{"trial_seconds_total", result.total_seconds}}},
  };
}

json sweep_sidecar(const ExperimentConfig& config, const std::vector<SweepRow>& rows, std::optional<double> slope) {
  json out_rows = json::array();
  for (const SweepRow& r : rows) {
    out_rows.push_back({{"n_star", r.n_star},
                        {"beta_star", r.beta_star},
                        {"mean_tan2", nullable(r.mean_tan2)},
                        {"sentinel_count", r.sentinel_count},
                        {"bound_thm3", number(r.bound_thm3)},
                        {"minimax_lb", number(r.minimax_lb)}});
  }
  return json{{"config", config_to_json(config)}, {"rows", out_rows}, {"loglog_slope", nullable(slope)}};
}

json compare_sidecar(const ExperimentConfig& config, const CompareResult& result) {
  return json{{"config", config_to_json(config)},
              {"timing", {{"online_seconds", result.online_seconds}, {"batch_seconds", result.batch_seconds}}},
              {"memory",
               {{"online_floats", result.online_floats},
                {"batch_floats", result.batch_floats},
                {"ratio", result.memory_ratio},
                {"peak_rss_kb", nullable(result.peak_rss_kb)}}}};
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::config, "'output': cannot open " + path + " for writing");
  out << contents;
  if (!out) throw Error(Errc::config, "'output': write to " + path + " failed");
}

}  // namespace ojapca::io
