#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "elfor/error.hpp"
#include "elfor/ingest.hpp"
#include "elfor/random.hpp"

namespace elfor {

// ---------------------------------------------------------------------------
// Second-digit Benford test

enum class AggregationLevel { station, village };

inline const char* to_string(AggregationLevel l) { return l == AggregationLevel::station ? "station" : "village"; }

/// Second significant decimal digit of n >= 10.
inline int second_digit(std::uint64_t n) {
  if (n < 10) throw InvalidArgument("second_digit: value has a single digit");
  while (n >= 100) n /= 10;
  return static_cast<int>(n % 10);
}

/// b_d = sum_{k=1..9} log10(1 + 1/(10k + d)).
inline std::array<double, 10> benford_second_digit_probabilities() {
  std::array<double, 10> b{};
  for (int d = 0; d < 10; ++d)
    for (int k = 1; k <= 9; ++k) b[d] += std::log10(1.0 + 1.0 / (10.0 * k + d));
  return b;
}

struct BenfordResult {
  AggregationLevel level = AggregationLevel::station;
  std::uint64_t min_value = 100;
  std::uint64_t n = 0;
  std::array<std::uint64_t, 10> counts{};
  std::array<double, 10> expected{};  // probabilities
  double chi2 = 0.0;                  // 9 degrees of freedom
  double p_value = 1.0;
  double log10_bf01 = 0.0;            // Benford vs uniform-Dirichlet multinomial
  double log10_posterior = 0.0;       // P(H0 | data), equal prior odds
  double posterior = 1.0;             // underflows to 0 for overwhelming evidence
  double log10_bf01_lower_bound = 0.0;  // -e p ln p calibration from the p-value
};

namespace detail {

/// log(x / (1 + x)) given log x, without overflow.
inline double log_odds_to_log_prob(double log_odds) {
  return log_odds >= 0.0 ? -std::log1p(std::exp(-log_odds)) : log_odds - std::log1p(std::exp(log_odds));
}

}  // namespace detail

/// Tests the second significant digit of every value >= `min_value` against
/// Benford's law. The alternative is a multinomial with a uniform Dirichlet
/// prior on the ten cell probabilities, whose marginal likelihood is closed form.
inline BenfordResult benford_test(std::span<const Count> values, AggregationLevel level = AggregationLevel::station,
                                  std::uint64_t min_value = 100) {
  if (min_value < 10) throw InvalidArgument("benford_test: min_value must be at least 10");
  BenfordResult res;
  res.level = level;
  res.min_value = min_value;
  res.expected = benford_second_digit_probabilities();
  for (Count v : values) {
    if (v < 0 || static_cast<std::uint64_t>(v) < min_value) continue;
    ++res.counts[static_cast<std::size_t>(second_digit(static_cast<std::uint64_t>(v)))];
    ++res.n;
  }
  if (res.n < 10) throw InsufficientDataError("benford_test: fewer than 10 values with enough digits");

  const double n = static_cast<double>(res.n);
  double log_bf = boost::math::lgamma(n + 10.0) - boost::math::lgamma(10.0);
  for (std::size_t d = 0; d < 10; ++d) {
    const double c = static_cast<double>(res.counts[d]);
    const double e = n * res.expected[d];
    res.chi2 += (c - e) * (c - e) / e;
    log_bf += c * std::log(res.expected[d]) - boost::math::lgamma(c + 1.0);
  }
  res.p_value = boost::math::gamma_q(4.5, res.chi2 / 2.0);
  res.log10_bf01 = log_bf / std::numbers::ln10;
  const double log_post = detail::log_odds_to_log_prob(log_bf);
  res.log10_posterior = log_post / std::numbers::ln10;
  res.posterior = std::exp(log_post);

  // Bound valid for p < 1/e; above that the bound is 1.
  const double p = res.p_value;
  if (p > 0.0 && p < 1.0 / std::numbers::e)
    res.log10_bf01_lower_bound = (1.0 + std::log(p) + std::log(-std::log(p))) / std::numbers::ln10;
  else if (p <= 0.0)
    res.log10_bf01_lower_bound = -std::numeric_limits<double>::infinity();
  return res;
}

/// Sum of V over the stations of each village, in first-appearance order.
inline std::vector<Count> village_yes_totals(std::span<const StationRecord> records) {
  std::vector<Count> out;
  for (const auto& g : group_indices(records, village_key)) {
    Count s = 0;
    for (auto i : g) s += records[i].yes;
    out.push_back(s);
  }
  return out;
}

inline std::vector<Count> station_yes_counts(std::span<const StationRecord> records) {
  std::vector<Count> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.yes);
  return out;
}

// ---------------------------------------------------------------------------
// Within-village voter-assignment test

inline constexpr double kAssignmentCritical = 2.576;  // two-sided 99% normal quantile
inline constexpr double kAssignmentNullRate = 0.01;

struct StationZ {
  std::size_t station = 0;  // index into the input records
  double z = 0.0;
  double variance = 0.0;
  bool exceeds = false;
  bool permutation = false;  // verdict from the permutation null rather than |z|
};

struct AssignmentResult {
  std::vector<StationZ> stations;
  std::size_t testable_villages = 0;
  std::size_t tested_stations = 0;
  std::size_t exceed_count = 0;
  double exceedance_fraction = 0.0;
  double expected_fraction = kAssignmentNullRate;
  double critical_z = kAssignmentCritical;
  double binomial_p_value = 1.0;  // P(X >= exceed_count), X ~ Bin(tested, 0.01)
  std::size_t permutation_villages = 0;
};

struct AssignmentOptions {
  bool permutation = false;       // Monte Carlo null where the normal approximation is poor
  std::size_t permutations = 1000;
  double min_variance = 5.0;      // villages with any variance below this use permutations
  std::uint64_t seed = 1;
};

/// Upper binomial tail P(X >= k) for X ~ Bin(n, p).
inline double binomial_upper_tail(std::size_t k, std::size_t n, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  return boost::math::ibeta(static_cast<double>(k), static_cast<double>(n - k + 1), p);
}

inline constexpr std::uint64_t kPermutationDomain = 0x5045'524d'0000'0000ULL;

/// Compares each station's 'Yes' count with random assignment of the village's
/// valid votes to its stations: V_i is then hypergeometric with mean
/// T_i V/T and variance T_i (V/T)(1 - V/T)(T - T_i)/(T - 1).
inline AssignmentResult assignment_test(std::span<const StationRecord> records, const AssignmentOptions& opt = {}) {
  AssignmentResult res;
  const auto villages = group_indices(records, village_key);
  for (std::size_t vi = 0; vi < villages.size(); ++vi) {
    std::vector<std::size_t> members;
    Count tv = 0, vv = 0;
    for (auto i : villages[vi]) {
      if (records[i].turnout <= 0) continue;
      members.push_back(i);
      tv += records[i].turnout;
      vv += records[i].yes;
    }
    if (members.size() < 2 || vv <= 0 || vv >= tv) continue;
    ++res.testable_villages;

    const double share = static_cast<double>(vv) / static_cast<double>(tv);
    std::vector<StationZ> zs;
    bool poor = false;
    for (auto i : members) {
      const double ti = static_cast<double>(records[i].turnout);
      const double var = ti * share * (1.0 - share) * (static_cast<double>(tv) - ti) / (static_cast<double>(tv) - 1.0);
      if (!(var > 0.0)) continue;
      const double z = (static_cast<double>(records[i].yes) - ti * share) / std::sqrt(var);
      zs.push_back({i, z, var, std::abs(z) > kAssignmentCritical, false});
      poor = poor || var < opt.min_variance;
    }
    if (opt.permutation && poor && !zs.empty()) {
      ++res.permutation_villages;
      std::vector<std::size_t> extreme(zs.size(), 0);
      for (std::size_t k = 0; k < opt.permutations; ++k) {
        Stream rng(opt.seed, kPermutationDomain ^ vi, k);
        Count yes_left = vv, total_left = tv;
        std::size_t zi = 0;
        for (auto i : members) {
          const Count ti = records[i].turnout;
          const Count drawn = hypergeometric(rng, yes_left, total_left, ti);
          yes_left -= drawn;
          total_left -= ti;
          if (zi < zs.size() && zs[zi].station == i) {
            const double mean = static_cast<double>(ti) * share;
            const double observed = std::abs(static_cast<double>(records[i].yes) - mean);
            if (std::abs(static_cast<double>(drawn) - mean) >= observed - 1e-9) ++extreme[zi];
            ++zi;
          }
        }
      }
      for (std::size_t z = 0; z < zs.size(); ++z) {
        const double p = static_cast<double>(extreme[z] + 1) / static_cast<double>(opt.permutations + 1);
        zs[z].exceeds = p < kAssignmentNullRate;
        zs[z].permutation = true;
      }
    }
    for (auto& z : zs) {
      res.exceed_count += z.exceeds ? 1 : 0;
      res.stations.push_back(z);
    }
  }
  if (res.testable_villages == 0) throw InsufficientDataError("assignment_test: no testable village");
  res.tested_stations = res.stations.size();
  if (res.tested_stations > 0)
    res.exceedance_fraction = static_cast<double>(res.exceed_count) / static_cast<double>(res.tested_stations);
  res.binomial_p_value = binomial_upper_tail(res.exceed_count, res.tested_stations, kAssignmentNullRate);
  return res;
}

}  // namespace elfor
