#pragma once

// CSV and JSON writers for run, sweep, compare and bounds results. Doubles
// are written in shortest round-trip form; missing values are empty CSV
// fields and JSON nulls.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ojapca/harness.hpp"

namespace ojapca::io {

std::string format_double(double value);

inline constexpr const char* kRunHeader =
    "n,mean_tan2,median_tan2,q10_tan2,q90_tan2,mean_sin2,sentinel_count,bound_thm3,minimax_lb";
inline constexpr const char* kSweepHeader = "n_star,beta_star,mean_tan2,sentinel_count,bound_thm3,minimax_lb";
inline constexpr const char* kCompareHeader = "n,online_mean_tan2,batch_mean_tan2,online_mean_sin2,batch_mean_sin2";

void write_run_csv(std::ostream& out, const AggregateResult& result);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_compare_csv(std::ostream& out, const CompareResult& result);

nlohmann::json to_json(const ExplicitConstants& c);
nlohmann::json to_json(const BoundReport& report);
nlohmann::json to_json(const HypothesisReport& report);
nlohmann::json to_json(const SnapshotAggregate& row);

/// Sidecar: config echo, bounds, hypotheses, diagnostics and timing.
nlohmann::json run_sidecar(const ExperimentConfig& config, const AggregateResult& result);
nlohmann::json sweep_sidecar(const ExperimentConfig& config, const std::vector<SweepRow>& rows,
                             std::optional<double> slope);
nlohmann::json compare_sidecar(const ExperimentConfig& config, const CompareResult& result);

/// Writes text to path; throws Error(Errc::config) when the file cannot be opened.
void write_file(const std::string& path, const std::string& contents);

}  // namespace ojapca::io
