#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <numbers>
#include <span>
#include <vector>

#include "elfor/error.hpp"

namespace elfor::stats {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

/// Two-pass mean and standard deviation. `ddof` = 0 gives the population
/// convention, 1 the sample convention.
inline MeanSd mean_sd(std::span<const double> xs, int ddof = 0) {
  const auto n = xs.size();
  if (n == 0 || n <= static_cast<std::size_t>(ddof))
    throw InsufficientDataError("mean_sd: not enough values");
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n - static_cast<std::size_t>(ddof)))};
}

/// Linear-interpolation quantile of a sorted sample (Hyndman-Fan type 7).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InsufficientDataError("quantile of empty sample");
  if (sorted.size() == 1) return sorted.front();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Mean and sd of Normal(mu, sigma) truncated to [lo, hi].
inline MeanSd truncated_normal_moments(double mu, double sigma, double lo = 0.0, double hi = 1.0) {
  const double a = (lo - mu) / sigma;
  const double b = (hi - mu) / sigma;
  const double z = normal_cdf(b) - normal_cdf(a);
  if (!(z > 1e-300)) throw InvalidArgument("truncated normal has no mass inside bounds");
  const double pa = normal_pdf(a);
  const double pb = normal_pdf(b);
  const double r = (pa - pb) / z;
  const double var = sigma * sigma * (1.0 + (a * pa - b * pb) / z - r * r);
  return {mu + sigma * r, std::sqrt(std::max(var, 0.0))};
}

/// Parent (mu, sigma) whose [lo, hi]-truncation has the given mean and sd.
/// Fixed-point iteration; falls back to the target when the truncation is negligible.
inline std::optional<MeanSd> untruncate_moments(MeanSd target, double lo = 0.0, double hi = 1.0) {
  // A normal truncated to [lo, hi] has sd below that of the uniform on [lo, hi].
  if (!(target.mean > lo && target.mean < hi) || !(target.sd > 0.0) || !(target.sd < (hi - lo) / std::sqrt(12.0)))
    return std::nullopt;
  MeanSd parent = target;
  for (int it = 0; it < 500; ++it) {
    const MeanSd cur = truncated_normal_moments(parent.mean, parent.sd, lo, hi);
    if (!std::isfinite(cur.mean) || !(cur.sd > 0.0)) return std::nullopt;
    const double dm = target.mean - cur.mean;
    const double ratio = target.sd / cur.sd;
    parent.mean += dm;
    parent.sd *= ratio;
    if (!std::isfinite(parent.mean) || !(parent.sd > 0.0) || parent.sd > 1e3 * (hi - lo)) return std::nullopt;
    if (std::abs(dm) < 1e-13 && std::abs(ratio - 1.0) < 1e-13) return parent;
  }
  const MeanSd cur = truncated_normal_moments(parent.mean, parent.sd, lo, hi);
  if (std::abs(cur.mean - target.mean) < 1e-9 && std::abs(cur.sd - target.sd) < 1e-9) return parent;
  return std::nullopt;
}

}  // namespace elfor::stats
