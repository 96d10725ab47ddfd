#pragma once

// Counter-based random numbers: every variate is a pure function of
// (key, counter), so streams can be split, replayed, or consumed from any
// thread without shared state.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ojapca::rng {

/// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child key for an independent sub-stream (trial index, purpose tag, ...).
constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t child) noexcept {
  return mix64(parent ^ mix64(child ^ 0x6a09e667f3bcc909ULL));
}

constexpr std::uint64_t bits(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(key ^ mix64(counter));
}

/// Uniform on the open interval (0, 1).
inline double uniform_open(std::uint64_t key, std::uint64_t counter) noexcept {
  return (static_cast<double>(bits(key, counter) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on counters 2c and 2c+1.
inline double standard_normal(std::uint64_t key, std::uint64_t counter) noexcept {
  const double u1 = uniform_open(key, 2 * counter);
  const double u2 = uniform_open(key, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Fair +-1.
inline double rademacher(std::uint64_t key, std::uint64_t counter) noexcept {
  return (bits(key, counter) >> 63) ? 1.0 : -1.0;
}

/// Uniform on [-sqrt(3), sqrt(3)] (unit variance).
inline double uniform_unit_variance(std::uint64_t key, std::uint64_t counter) noexcept {
  return std::numbers::sqrt3 * (2.0 * uniform_open(key, counter) - 1.0);
}

/// Sequential cursor over a counter-based stream.
class Cursor {
 public:
  explicit Cursor(std::uint64_t key, std::uint64_t start = 0) noexcept : key_(key), counter_(start) {}

  double normal() noexcept { return standard_normal(key_, counter_++); }
  double uniform() noexcept { return uniform_open(key_, counter_++); }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace ojapca::rng
