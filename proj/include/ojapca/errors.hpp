#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ojapca {

enum class Errc {
  rank_deficient,
  shape_mismatch,
  singular_top_block,
  non_finite,
  dimension_mismatch,
  invalid_argument,
  no_gap,
  out_of_regime,
  gap_too_small,
  no_convergence,
  config,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::rank_deficient: return "RankDeficient";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::singular_top_block: return "SingularTopBlock";
    case Errc::non_finite: return "NonFinite";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::no_gap: return "NoGap";
    case Errc::out_of_regime: return "OutOfRegime";
    case Errc::gap_too_small: return "GapTooSmall";
    case Errc::no_convergence: return "NoConvergence";
    case Errc::config: return "ConfigError";
  }
  return "Unknown";
}

/// Library-wide exception; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ojapca
