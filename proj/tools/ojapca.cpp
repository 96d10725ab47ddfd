// Command-line driver: bounds, run, sweep, compare, selftest.

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ojapca/config.hpp"
#include "ojapca/harness.hpp"
#include "ojapca/io.hpp"
#include "ojapca/selftest.hpp"

namespace {

enum Exit { kOk = 0, kConfigError = 1, kRuntimeError = 2, kSelftestFailed = 3 };

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  bool json = false;
  unsigned threads = 1;
  bool quiet = false;
};

ojapca::ExperimentConfig load(const Options& opts) {
  std::vector<std::string> overrides;
  // The environment seed sits below explicit overrides.
  if (const char* seed = std::getenv("OJA_SEED"); seed && *seed) overrides.push_back(std::string("base_seed=") + seed);
  overrides.insert(overrides.end(), opts.overrides.begin(), opts.overrides.end());
  return ojapca::load_config(opts.config, overrides);
}

std::string cell(const std::optional<double>& v) { return v ? ojapca::io::format_double(*v) : "-"; }

void print_bounds_text(std::ostream& out, const ojapca::BoundReport& r, const ojapca::HypothesisReport& h) {
  using ojapca::io::format_double;
  out << "varphi          " << format_double(r.varphi.value) << "  in [" << format_double(r.varphi.lo) << ", "
      << format_double(r.varphi.hi) << "]\n";
  out << "sigma_*^2       " << format_double(r.sigma_star_sq) << '\n';
  out << "psi             " << format_double(r.psi) << '\n';
  out << "beta_*          " << cell(r.beta_star) << '\n';
  out << "rho_L           " << cell(r.rho_L) << '\n';
  out << "M(eps)          " << (r.m_eps ? std::to_string(*r.m_eps) : "-") << '\n';
  for (const auto& [s, n] : r.n_s) out << "N_s  s=" << std::left << std::setw(9) << format_double(s) << n << '\n';
  if (r.constants) {
    const auto& c = *r.constants;
    out << "constants       C_V=" << format_double(c.C_V) << " C_Delta=" << format_double(c.C_Delta)
        << " C_T=" << format_double(c.C_T) << " C_kappa=" << format_double(c.C_kappa)
        << " C_nu=" << format_double(c.C_nu) << " C_circ=" << format_double(c.C_circ) << '\n';
  }
  const auto& k = r.constant_caps;
  out << "constant caps   C_V=" << format_double(k.C_V) << " C_Delta=" << format_double(k.C_Delta)
      << " C_T=" << format_double(k.C_T) << " C_kappa=" << format_double(k.C_kappa)
      << " C_nu=" << format_double(k.C_nu) << " C_circ=" << format_double(k.C_circ) << '\n';
  out << "C_circ regime   " << (r.c_circ_in_regime ? "inside" : "outside") << "\n\n";

  out << std::left << std::setw(12) << "n" << std::setw(24) << "minimax" << std::setw(24) << "thm1" << std::setw(24)
      << "thm2" << "thm3\n";
  for (std::size_t i = 0; i < r.n_grid.size(); ++i) {
    out << std::setw(12) << r.n_grid[i] << std::setw(24) << format_double(r.minimax[i]) << std::setw(24)
        << format_double(r.thm1[i]) << std::setw(24) << (r.thm2.empty() ? "-" : format_double(r.thm2[i]))
        << format_double(r.thm3[i]) << '\n';
  }

  out << "\nhypotheses (" << (h.all_hold ? "all hold" : "some fail") << ")\n";
  for (const auto& c : h.conditions) {
    out << "  " << std::setw(24) << c.name << std::setw(7) << (c.holds ? "true" : "false") << format_double(c.slack)
        << '\n';
  }
}

int cmd_bounds(const Options& opts) {
  const auto config = load(opts);
  const auto setup = ojapca::ExperimentSetup::from(config);
  const auto report = ojapca::bound_report_for(setup, setup.snapshots);
  const auto hypotheses = ojapca::hypotheses_for(setup);
  if (opts.json) {
    nlohmann::json doc{{"config", ojapca::config_to_json(config)},
                       {"bounds", ojapca::io::to_json(report)},
                       {"hypotheses", ojapca::io::to_json(hypotheses)}};
    std::cout << doc.dump(2) << '\n';
  } else {
    print_bounds_text(std::cout, report, hypotheses);
  }
  return kOk;
}

void write_outputs(const std::string& stem, const std::string& csv, const nlohmann::json& sidecar, bool quiet) {
  ojapca::io::write_file(stem + ".csv", csv);
  ojapca::io::write_file(stem + ".json", sidecar.dump(2) + "\n");
  if (!quiet) std::cerr << "wrote " << stem << ".csv and " << stem << ".json\n";
}

int cmd_run(const Options& opts) {
  const auto config = load(opts);
  const auto result = ojapca::run_monte_carlo(config, opts.threads);
  std::ostringstream csv;
  ojapca::io::write_run_csv(csv, result);
  write_outputs(config.output, csv.str(), ojapca::io::run_sidecar(config, result), opts.quiet);
  if (opts.json) std::cout << ojapca::io::run_sidecar(config, result).dump(2) << '\n';
  return kOk;
}

int cmd_sweep(const Options& opts) {
  const auto config = load(opts);
  if (config.budgets.empty()) throw ojapca::Error(ojapca::Errc::config, "'budgets': sweep needs a budget list");
  const auto rows = ojapca::sweep_budget(config, config.budgets, opts.threads);
  std::optional<double> slope;
  try {
    slope = ojapca::loglog_slope(rows);
  } catch (const ojapca::Error&) {
  }
  std::ostringstream csv;
  ojapca::io::write_sweep_csv(csv, rows);
  const auto sidecar = ojapca::io::sweep_sidecar(config, rows, slope);
  write_outputs(config.output + "_sweep", csv.str(), sidecar, opts.quiet);
  if (!opts.quiet && slope) std::cerr << "log-log slope " << ojapca::io::format_double(*slope) << '\n';
  if (opts.json) std::cout << sidecar.dump(2) << '\n';
  return kOk;
}

int cmd_compare(const Options& opts) {
  const auto config = load(opts);
  if (config.n_steps < 1000) throw ojapca::Error(ojapca::Errc::config, "'n_steps': compare needs n_steps >= 1000");
  const auto result = ojapca::compare_online_batch(config, opts.threads);
  std::ostringstream csv;
  ojapca::io::write_compare_csv(csv, result);
  const auto sidecar = ojapca::io::compare_sidecar(config, result);
  write_outputs(config.output + "_compare", csv.str(), sidecar, opts.quiet);
  if (opts.json) std::cout << sidecar.dump(2) << '\n';
  return kOk;
}

int cmd_selftest(const Options& opts) {
  const auto cases = ojapca::run_selftest();
  std::ostringstream text;
  const bool ok = ojapca::report_selftest(cases, text);
  if (!opts.quiet || !ok) std::cout << text.str();
  return ok ? kOk : kSelftestFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming subspace PCA experiments"};
  app.require_subcommand(1);
  Options opts;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* config = sub->add_option("--config", opts.config, "Experiment config (JSON)");
    if (needs_config) config->required()->check(CLI::ExistingFile);
    sub->add_option("--override", opts.overrides, "KEY=VALUE override (repeatable)")->take_all();
    sub->add_flag("--json", opts.json, "Print JSON to stdout");
    sub->add_option("--threads", opts.threads, "Worker threads (0 = auto)");
    sub->add_flag("--quiet", opts.quiet, "Suppress progress output");
  };
  add_common(app.add_subcommand("bounds", "Print bound tables and hypothesis checks"), true);
  add_common(app.add_subcommand("run", "Monte Carlo error curves"), true);
  add_common(app.add_subcommand("sweep", "Budget sweep with the matched stepsize"), true);
  add_common(app.add_subcommand("compare", "Online vs batch PCA"), true);
  add_common(app.add_subcommand("selftest", "Built-in oracle checks"), false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "bounds") return cmd_bounds(opts);
    if (name == "run") return cmd_run(opts);
    if (name == "sweep") return cmd_sweep(opts);
    if (name == "compare") return cmd_compare(opts);
    return cmd_selftest(opts);
  } catch (const ojapca::TrialError& e) {
    std::cerr << "error: " << e.what() << " (trial " << e.trial_index() << ")\n";
    return kRuntimeError;
  } catch (const ojapca::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ojapca::Errc::config ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
