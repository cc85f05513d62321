#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "elfor/error.hpp"

namespace elfor {

using Count = std::int64_t;

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Combines a master seed with a domain tag and an index into an independent stream key.
inline constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t domain,
                                          std::uint64_t index) noexcept {
  return mix64(mix64(mix64(seed) ^ (domain * 0x9e3779b97f4a7c15ULL)) + index);
}

/// SplitMix64 stream. One instance per (seed, domain, index) gives counter-based
/// draws: a station's variates depend only on its key, never on scheduling.
/// All variate algorithms below are fixed, so outputs are reproducible across
/// standard libraries.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key) noexcept : state_(key) {}
  Stream(std::uint64_t seed, std::uint64_t domain, std::uint64_t index) noexcept
      : state_(stream_key(seed, domain, index)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open0() noexcept { return 1.0 - uniform(); }

  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift; the tiny bias at n << 2^64 is irrelevant here.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

  /// Standard normal by Box-Muller, both uniforms consumed per call.
  double normal() noexcept {
    const double u1 = uniform_open0();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::uint64_t state_;
};

/// Normal(mean, sd) redrawn until it lands in [lo, hi].
inline double truncated_normal(Stream& rng, double mean, double sd, double lo = 0.0,
                               double hi = 1.0) {
  if (!(sd > 0.0)) {
    if (mean < lo || mean > hi) throw InvalidArgument("truncated_normal: degenerate law outside bounds");
    return mean;
  }
  // Guard against laws with negligible mass inside the bounds.
  for (int attempt = 0; attempt < 1'000'000; ++attempt) {
    const double x = rng.normal(mean, sd);
    if (x >= lo && x <= hi) return x;
  }
  throw InvalidArgument("truncated_normal: rejection sampler did not terminate");
}

/// Exact binomial draw by Bernoulli summation. Cost is O(trials).
inline Count binomial(Stream& rng, Count trials, double p) noexcept {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  Count k = 0;
  for (Count i = 0; i < trials; ++i) k += rng.bernoulli(p) ? 1 : 0;
  return k;
}

/// Hypergeometric draw: number of marked items among `draws` taken without
/// replacement from an urn of `total` items of which `marked` are marked.
inline Count hypergeometric(Stream& rng, Count marked, Count total, Count draws) noexcept {
  if (draws <= 0 || marked <= 0) return 0;
  if (marked >= total) return draws;
  // Sample from the smaller side of the urn.
  const bool flip = draws > total / 2;
  Count take = flip ? total - draws : draws;
  Count m = marked;
  Count remaining = total;
  Count hits = 0;
  for (; take > 0; --take, --remaining) {
    if (rng.below(static_cast<std::uint64_t>(remaining)) < static_cast<std::uint64_t>(m)) {
      ++hits;
      --m;
    }
  }
  return flip ? marked - hits : hits;
}

}  // namespace elfor
