#pragma once

// Monte Carlo orchestration: per-trial runs with derived seeds, aggregation
// into error curves, budget sweeps, the batch comparison, and result files.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ojapca/bounds.hpp"
#include "ojapca/data_models.hpp"
#include "ojapca/oja.hpp"

namespace ojapca {

struct ModelConfig {
  SpectrumSpec spectrum;
  Family family{Family::gaussian};
  /// Haar rotation seed; identity rotation when empty.
  std::optional<std::uint64_t> rotation_seed;
};

struct StepsizeRule {
  enum class Kind { fixed, optimal };
  Kind kind{Kind::fixed};
  double beta{0.01};
  std::int64_t n_star{0};
};

struct BoundsConfig {
  bool enabled{true};
  /// Record sphere and quasi-bounded diagnostics per trial.
  bool diagnostics{true};
  double omega{0.5};
  double phi{1.0};
  std::optional<double> delta;
  std::optional<double> c_p;
};

struct ExperimentConfig {
  ModelConfig model;
  std::int64_t p{1};
  std::int64_t d{2};
  StepsizeRule stepsize;
  std::int64_t n_steps{0};
  /// Empty means the default grid (powers of two, plus n_steps).
  std::vector<std::int64_t> snapshots;
  std::int64_t trials{1};
  std::uint64_t base_seed{0};
  double kappa{10.0};
  double eps{0.1};
  BoundsConfig bounds;
  double minimax_c{1.0};
  std::string output{"ojapca_run"};
  /// Budgets for `sweep`.
  std::vector<std::int64_t> budgets;
};

/// Powers of two up to n_steps, with n_steps appended when it is not one.
std::vector<std::int64_t> default_snapshot_grid(std::int64_t n_steps);

/// Shared, immutable pieces derived once from a config.
struct ExperimentSetup {
  ExperimentConfig config;
  std::shared_ptr<const CovarianceModel> model;
  BasisMatrix reference;
  double beta{0};
  double psi{0};
  std::vector<std::int64_t> snapshots;

  static ExperimentSetup from(const ExperimentConfig& config);
};

struct TrialRecord {
  std::int64_t trial_index{0};
  ErrorSnapshot initial;
  std::vector<ErrorSnapshot> snapshots;
  DiagnosticsRecord diagnostics;
  double seconds{0};
};

std::uint64_t trial_stream_seed(std::uint64_t base_seed, std::int64_t trial_index);
std::uint64_t trial_init_seed(std::uint64_t base_seed, std::int64_t trial_index);

TrialRecord run_trial(const ExperimentSetup& setup, std::int64_t trial_index);
TrialRecord run_trial(const ExperimentConfig& config, std::int64_t trial_index);

struct SnapshotAggregate {
  std::int64_t n{0};
  std::optional<double> mean_tan2;
  std::optional<double> median_tan2;
  std::optional<double> q10_tan2;
  std::optional<double> q90_tan2;
  double mean_sin2{0};
  std::int64_t sentinel_count{0};
  std::int64_t included_count{0};
  /// Mean over trials that are finite and had no quasi-bounded violation by n.
  std::optional<double> conditional_mean_tan2;
  std::int64_t conditional_count{0};
  std::optional<double> bound_thm1;
  std::optional<double> bound_thm3;
  double minimax_lb{0};
};

struct AggregateResult {
  std::int64_t trials{0};
  SnapshotAggregate initial;
  std::vector<SnapshotAggregate> rows;
  double quasi_bounded_violation_fraction{0};
  /// floor(log2(N_out)) -> number of trials; key -1 counts trials that never left.
  std::map<std::int64_t, std::int64_t> sphere_exit_histogram;
  std::int64_t reorthonormalizations{0};
  double total_seconds{0};
  std::optional<BoundReport> bound_report;
  std::optional<HypothesisReport> hypotheses;
};

/// Type-7 (linear interpolation) sample quantile of a sorted range.
double quantile_sorted(const std::vector<double>& sorted, double q);

/// Deterministic fold over trials in ascending index order.
AggregateResult aggregate(const ExperimentSetup& setup, std::vector<TrialRecord> trials);

/// Thrown when a trial fails; carries the trial index.
class TrialError : public Error {
 public:
  TrialError(std::int64_t trial_index, Errc code, const std::string& what)
      : Error(code, "trial " + std::to_string(trial_index) + ": " + what), trial_index_(trial_index) {}
  std::int64_t trial_index() const noexcept { return trial_index_; }

 private:
  std::int64_t trial_index_;
};

/// Runs every trial (concurrently when threads != 1; 0 = hardware concurrency).
std::vector<TrialRecord> run_trials(const ExperimentSetup& setup, unsigned threads);
AggregateResult run_monte_carlo(const ExperimentConfig& config, unsigned threads = 1);

BoundReport bound_report_for(const ExperimentSetup& setup, const std::vector<std::int64_t>& n_grid);
HypothesisReport hypotheses_for(const ExperimentSetup& setup);

struct SweepRow {
  std::int64_t n_star{0};
  double beta_star{0};
  std::optional<double> mean_tan2;
  std::int64_t sentinel_count{0};
  double bound_thm3{0};
  double minimax_lb{0};
};

std::vector<SweepRow> sweep_budget(const ExperimentConfig& config, const std::vector<std::int64_t>& budgets,
                                   unsigned threads = 1);

/// Least-squares slope of log(mean error) against log(N / ln N).
double loglog_slope(const std::vector<SweepRow>& rows);

struct CompareRow {
  std::int64_t n{0};
  std::optional<double> online_mean_tan2;
  double batch_mean_tan2{0};
  double online_mean_sin2{0};
  double batch_mean_sin2{0};
};

struct CompareResult {
  std::vector<CompareRow> rows;
  double online_seconds{0};
  double batch_seconds{0};
  std::int64_t online_floats{0};
  std::int64_t batch_floats{0};
  double memory_ratio{0};
  /// Peak resident set size of the process, when the platform reports it.
  std::optional<std::int64_t> peak_rss_kb;
};

CompareResult compare_online_batch(const ExperimentConfig& config, unsigned threads = 1);

struct TimingProfile {
  std::int64_t d{0};
  std::int64_t p{0};
  std::int64_t n{0};
  double online_seconds{0};
  double batch_seconds{0};
};

/// Median of `repetitions` timings of n online steps and n covariance
/// accumulations on pre-drawn Gaussian samples.
TimingProfile time_scaling(std::int64_t d, std::int64_t p, std::int64_t n, std::uint64_t seed, int repetitions = 5);

std::optional<std::int64_t> peak_rss_kb();

}  // namespace ojapca
