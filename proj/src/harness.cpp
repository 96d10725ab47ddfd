#include "ojapca/harness.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "ojapca/batch.hpp"

namespace ojapca {

namespace {

constexpr std::uint64_t kStreamTag = 0x5354524541ULL;
constexpr std::uint64_t kInitTag = 0x494e4954ULL;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

unsigned resolve_threads(unsigned threads, std::int64_t jobs) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::max<std::int64_t>(1, std::min<std::int64_t>(threads, jobs)));
}

// Runs fn(i) for i in [0, count). Failures are collected and the one with the
// lowest index is rethrown as a TrialError.
template <typename Fn>
void parallel_for(std::int64_t count, unsigned threads, Fn&& fn) {
  std::atomic<std::int64_t> next{0};
  std::mutex guard;
  std::int64_t failed_index = -1;
  Errc failed_code = Errc::invalid_argument;
  std::string failed_what;

  auto worker = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (const Error& e) {
        std::lock_guard lock(guard);
        if (failed_index < 0 || i < failed_index) failed_index = i, failed_code = e.code(), failed_what = e.what();
      } catch (const std::exception& e) {
        std::lock_guard lock(guard);
        if (failed_index < 0 || i < failed_index) {
          failed_index = i, failed_code = Errc::non_finite, failed_what = e.what();
        }
      }
    }
  };

  const unsigned n = resolve_threads(threads, count);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed_index >= 0) throw TrialError(failed_index, failed_code, failed_what);
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

BoundInputs bound_inputs(const ExperimentSetup& setup) {
  const ExperimentConfig& c = setup.config;
  return BoundInputs{setup.model->spectrum(), setup.beta, c.eps,          c.kappa,
                     c.bounds.phi,            setup.psi,  c.bounds.c_p,   c.bounds.delta};
}

std::int64_t floor_log2(std::int64_t n) {
  std::int64_t k = 0;
  while ((n >>= 1) > 0) ++k;
  return k;
}

}  // namespace

std::vector<std::int64_t> default_snapshot_grid(std::int64_t n_steps) {
  std::vector<std::int64_t> grid;
  for (std::int64_t n = 1; n <= n_steps; n *= 2) grid.push_back(n);
  if (n_steps >= 1 && grid.back() != n_steps) grid.push_back(n_steps);
  return grid;
}

ExperimentSetup ExperimentSetup::from(const ExperimentConfig& config) {
  Spectrum spectrum = make_spectrum(config.model.spectrum, config.d, config.p);
  std::shared_ptr<const CovarianceModel> model;
  if (config.model.rotation_seed) {
    model = std::make_shared<const CovarianceModel>(spectrum, config.model.family,
                                                    random_orthogonal(config.d, *config.model.rotation_seed));
  } else {
    model = std::make_shared<const CovarianceModel>(spectrum, config.model.family);
  }
  const double beta = config.stepsize.kind == StepsizeRule::Kind::fixed
                          ? config.stepsize.beta
                          : optimal_stepsize(config.stepsize.n_star, spectrum.gamma());
  return ExperimentSetup{config,
                         model,
                         model->principal_basis(),
                         beta,
                         psi_of_family(config.model.family),
                         config.snapshots.empty() ? default_snapshot_grid(config.n_steps) : config.snapshots};
}

std::uint64_t trial_stream_seed(std::uint64_t base_seed, std::int64_t trial_index) {
  return rng::derive_key(rng::derive_key(base_seed, static_cast<std::uint64_t>(trial_index)), kStreamTag);
}

std::uint64_t trial_init_seed(std::uint64_t base_seed, std::int64_t trial_index) {
  return rng::derive_key(rng::derive_key(base_seed, static_cast<std::uint64_t>(trial_index)), kInitTag);
}

TrialRecord run_trial(const ExperimentSetup& setup, std::int64_t trial_index) {
  const ExperimentConfig& c = setup.config;
  const auto start = Clock::now();
  const BasisMatrix initial = grassmann_uniform(c.d, c.p, trial_init_seed(c.base_seed, trial_index));
  SampleStream stream(setup.model, trial_stream_seed(c.base_seed, trial_index));

  StepConfig step;
  step.beta = setup.beta;
  RunOptions options;
  options.record_at = setup.snapshots;
  options.reference = setup.reference;
  if (c.bounds.diagnostics) options.diagnostics = DiagnosticsContext{c.kappa, c.eps, setup.reference, setup.model};

  RunRecord run = run_stream(initial, stream, c.n_steps, step, options);
  TrialRecord out;
  out.trial_index = trial_index;
  out.initial = *run.initial;
  out.snapshots = std::move(run.snapshots);
  out.diagnostics = run.final_state.diagnostics();
  out.seconds = seconds_since(start);
  return out;
}

TrialRecord run_trial(const ExperimentConfig& config, std::int64_t trial_index) {
  return run_trial(ExperimentSetup::from(config), trial_index);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error(Errc::invalid_argument, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

AggregateResult aggregate(const ExperimentSetup& setup, std::vector<TrialRecord> trials) {
  std::sort(trials.begin(), trials.end(),
            [](const TrialRecord& a, const TrialRecord& b) { return a.trial_index < b.trial_index; });
  const ExperimentConfig& c = setup.config;
  const Spectrum& spectrum = setup.model->spectrum();
  const double s2 = effective_noise_variance(spectrum);

  auto fold = [&](auto&& pick, std::int64_t n) {
    SnapshotAggregate row;
    row.n = n;
    std::vector<double> finite;
    std::vector<double> conditional;
    double sin_sum = 0;
    for (const TrialRecord& t : trials) {
      const ErrorSnapshot& e = pick(t);
      sin_sum += e.sin_f2;
      if (e.tan_f2.unbounded) {
        ++row.sentinel_count;
        continue;
      }
      finite.push_back(e.tan_f2.value);
      const auto& v = t.diagnostics.quasi_bounded_violation;
      if (!v || *v > n) conditional.push_back(e.tan_f2.value);
    }
    row.included_count = std::int64_t(finite.size());
    row.conditional_count = std::int64_t(conditional.size());
    if (!trials.empty()) row.mean_sin2 = sin_sum / static_cast<double>(trials.size());
    row.mean_tan2 = mean_of(finite);
    row.conditional_mean_tan2 = mean_of(conditional);
    if (!finite.empty()) {
      std::sort(finite.begin(), finite.end());
      row.median_tan2 = quantile_sorted(finite, 0.5);
      row.q10_tan2 = quantile_sorted(finite, 0.1);
      row.q90_tan2 = quantile_sorted(finite, 0.9);
    }
    return row;
  };

  AggregateResult out;
  out.trials = std::int64_t(trials.size());
  out.initial = fold([](const TrialRecord& t) -> const ErrorSnapshot& { return t.initial; }, 0);

  std::optional<BoundInputs> inputs;
  double varphi_value = 0;
  if (c.bounds.enabled) {
    inputs = bound_inputs(setup);
    varphi_value = varphi(spectrum).value;
  }
  for (std::size_t k = 0; k < setup.snapshots.size(); ++k) {
    const std::int64_t n = setup.snapshots[k];
    SnapshotAggregate row = fold([k](const TrialRecord& t) -> const ErrorSnapshot& { return t.snapshots[k]; }, n);
    row.minimax_lb = minimax_lower_bound(c.p, c.d, s2, n, c.minimax_c);
    if (inputs) {
      row.bound_thm1 = thm1_bound(*inputs, n);
      row.bound_thm3 = thm3_bound(setup.psi, varphi_value, spectrum.gamma(), n);
    }
    out.rows.push_back(row);
  }

  std::int64_t violations = 0;
  for (const TrialRecord& t : trials) {
    if (t.diagnostics.quasi_bounded_violation) ++violations;
    const auto& exit = t.diagnostics.first_sphere_exit;
    ++out.sphere_exit_histogram[exit ? floor_log2(*exit) : -1];
    out.reorthonormalizations += t.diagnostics.reorthonormalization_count;
    out.total_seconds += t.seconds;
  }
  if (!trials.empty()) out.quasi_bounded_violation_fraction = double(violations) / double(trials.size());
  if (!c.bounds.diagnostics) out.sphere_exit_histogram.clear();

  if (c.bounds.enabled) {
    out.bound_report = bound_report_for(setup, setup.snapshots);
    out.hypotheses = hypotheses_for(setup);
  }
  return out;
}

std::vector<TrialRecord> run_trials(const ExperimentSetup& setup, unsigned threads) {
  const std::int64_t count = setup.config.trials;
  std::vector<TrialRecord> records(static_cast<std::size_t>(count));
  parallel_for(count, threads, [&](std::int64_t i) { records[static_cast<std::size_t>(i)] = run_trial(setup, i); });
  return records;
}

AggregateResult run_monte_carlo(const ExperimentConfig& config, unsigned threads) {
  const ExperimentSetup setup = ExperimentSetup::from(config);
  return aggregate(setup, run_trials(setup, threads));
}

BoundReport bound_report_for(const ExperimentSetup& setup, const std::vector<std::int64_t>& n_grid) {
  BoundReportRequest request{bound_inputs(setup), n_grid, setup.config.minimax_c, std::nullopt};
  if (setup.config.stepsize.kind == StepsizeRule::Kind::optimal) request.n_star = setup.config.stepsize.n_star;
  return make_bound_report(request);
}

HypothesisReport hypotheses_for(const ExperimentSetup& setup) {
  const ExperimentConfig& c = setup.config;
  HypothesisInputs in{setup.model->spectrum(), setup.beta,  c.eps,     c.bounds.omega,
                      c.kappa,                 c.bounds.phi, c.n_steps, c.bounds.delta};
  return check_hypotheses(in);
}

std::vector<SweepRow> sweep_budget(const ExperimentConfig& config, const std::vector<std::int64_t>& budgets,
                                   unsigned threads) {
  std::vector<SweepRow> rows;
  for (const std::int64_t budget : budgets) {
    ExperimentConfig c = config;
    c.stepsize.kind = StepsizeRule::Kind::optimal;
    c.stepsize.n_star = budget;
    c.n_steps = budget;
    c.snapshots = {budget};
    const ExperimentSetup setup = ExperimentSetup::from(c);
    const AggregateResult result = aggregate(setup, run_trials(setup, threads));
    const SnapshotAggregate& last = result.rows.back();

    const Spectrum& spectrum = setup.model->spectrum();
    SweepRow row;
    row.n_star = budget;
    row.beta_star = setup.beta;
    row.mean_tan2 = last.mean_tan2;
    row.sentinel_count = last.sentinel_count;
    row.bound_thm3 = thm3_bound(setup.psi, varphi(spectrum).value, spectrum.gamma(), budget);
    row.minimax_lb = last.minimax_lb;
    rows.push_back(row);
  }
  return rows;
}

double loglog_slope(const std::vector<SweepRow>& rows) {
  std::vector<double> x;
  std::vector<double> y;
  for (const SweepRow& r : rows) {
    if (!r.mean_tan2 || !(*r.mean_tan2 > 0)) continue;
    const double n = static_cast<double>(r.n_star);
    x.push_back(std::log(n / std::log(n)));
    y.push_back(std::log(*r.mean_tan2));
  }
  if (x.size() < 2) throw Error(Errc::invalid_argument, "slope needs two budgets with positive mean error");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / double(y.size());
  double sxy = 0;
  double sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0)) throw Error(Errc::invalid_argument, "slope needs distinct budgets");
  return sxy / sxx;
}

CompareResult compare_online_batch(const ExperimentConfig& config, unsigned threads) {
  ExperimentSetup setup = ExperimentSetup::from(config);
  const ExperimentConfig& c = setup.config;
  // The batch estimate needs a covariance of rank > p; the default grid starts
  // at n = 1, so keep only points with at least 2d samples (and the endpoint).
  if (config.snapshots.empty()) {
    std::erase_if(setup.snapshots, [&](std::int64_t n) { return n < 2 * c.d && n != c.n_steps; });
  }
  const std::size_t rows = setup.snapshots.size();
  const auto count = static_cast<std::size_t>(c.trials);

  struct PerTrial {
    std::vector<ErrorSnapshot> online;
    std::vector<ErrorSnapshot> batch;
    double online_seconds{0};
    double batch_seconds{0};
  };
  std::vector<PerTrial> per(count);

  parallel_for(c.trials, threads, [&](std::int64_t i) {
    PerTrial& out = per[static_cast<std::size_t>(i)];
    const BasisMatrix initial = grassmann_uniform(c.d, c.p, trial_init_seed(c.base_seed, i));
    StepConfig step;
    step.beta = setup.beta;

    // Online: O(dp) state.
    SampleStream stream(setup.model, trial_stream_seed(c.base_seed, i));
    OjaState state(initial, step);
    VectorXd x(c.d);
    auto start = Clock::now();
    std::size_t next = 0;
    for (std::int64_t n = 1; n <= c.n_steps; ++n) {
      stream.draw_into(x);
      state.advance(x);
      if (next < rows && setup.snapshots[next] == n) {
        out.online_seconds += seconds_since(start);
        while (next < rows && setup.snapshots[next] == n) {
          out.online.push_back(measure_error(state.basis(), setup.reference, n));
          ++next;
        }
        start = Clock::now();
      }
    }
    out.online_seconds += seconds_since(start);

    // Batch on the identical sample sequence.
    stream.rewind();
    EmpiricalCovariance<double> acc(c.d);
    start = Clock::now();
    next = 0;
    for (std::int64_t n = 1; n <= c.n_steps; ++n) {
      stream.draw_into(x);
      acc.accumulate(x);
      while (next < rows && setup.snapshots[next] == n) {
        const BasisMatrix estimate = top_p_subspace(acc, c.p);
        out.batch_seconds += seconds_since(start);
        out.batch.push_back(measure_error(estimate, setup.reference, n));
        start = Clock::now();
        ++next;
      }
    }
    out.batch_seconds += seconds_since(start);
  });

  CompareResult result;
  for (std::size_t k = 0; k < rows; ++k) {
    CompareRow row;
    row.n = setup.snapshots[k];
    std::vector<double> online_tan;
    double batch_tan = 0;
    std::int64_t batch_finite = 0;
    for (const PerTrial& t : per) {
      if (!t.online[k].tan_f2.unbounded) online_tan.push_back(t.online[k].tan_f2.value);
      if (!t.batch[k].tan_f2.unbounded) batch_tan += t.batch[k].tan_f2.value, ++batch_finite;
      row.online_mean_sin2 += t.online[k].sin_f2;
      row.batch_mean_sin2 += t.batch[k].sin_f2;
    }
    row.online_mean_tan2 = mean_of(online_tan);
    row.batch_mean_tan2 = batch_finite > 0 ? batch_tan / double(batch_finite) : 0.0;
    row.online_mean_sin2 /= double(count);
    row.batch_mean_sin2 /= double(count);
    result.rows.push_back(row);
  }
  for (const PerTrial& t : per) {
    result.online_seconds += t.online_seconds;
    result.batch_seconds += t.batch_seconds;
  }
  result.online_floats = c.d * c.p;
  result.batch_floats = c.d * c.d;
  result.memory_ratio = double(result.batch_floats) / double(result.online_floats);
  result.peak_rss_kb = peak_rss_kb();
  return result;
}

TimingProfile time_scaling(std::int64_t d, std::int64_t p, std::int64_t n, std::uint64_t seed, int repetitions) {
  if (d < 2 || p < 1 || p >= d || n < 1 || repetitions < 1) throw Error(Errc::invalid_argument, "bad timing shape");
  MatrixXd samples(d, n);
  rng::Cursor cursor(seed);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < d; ++i) samples(i, j) = cursor.normal();
  const BasisMatrix initial = grassmann_uniform(d, p, rng::derive_key(seed, kInitTag));

  StepConfig step;
  step.beta = 1.0 / static_cast<double>(4 * d);
  step.reorth_check_interval = 0;
  std::vector<double> online;
  std::vector<double> batch;
  double sink = 0;
  for (int r = 0; r < repetitions; ++r) {
    OjaState state(initial, step);
    auto start = Clock::now();
    for (Index j = 0; j < n; ++j) state.advance(samples.col(j));
    online.push_back(seconds_since(start));
    sink += state.matrix()(0, 0);

    EmpiricalCovariance<double> acc(d);
    start = Clock::now();
    for (Index j = 0; j < n; ++j) acc.accumulate(samples.col(j));
    batch.push_back(seconds_since(start));
    sink += acc.sum_outer()(0, 0);
  }
  // Keeps the loops observable.
  if (!std::isfinite(sink)) throw Error(Errc::non_finite, "timing run produced non-finite state");
  std::sort(online.begin(), online.end());
  std::sort(batch.begin(), batch.end());
  return TimingProfile{d, p, n, quantile_sorted(online, 0.5), quantile_sorted(batch, 0.5)};
}

std::optional<std::int64_t> peak_rss_kb() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) != 0) return std::nullopt;
  return static_cast<std::int64_t>(usage.ru_maxrss);
}

}  // namespace ojapca
