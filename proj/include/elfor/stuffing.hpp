#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "elfor/error.hpp"
#include "elfor/ingest.hpp"
#include "elfor/parallel.hpp"
#include "elfor/random.hpp"
#include "elfor/simplex.hpp"
#include "elfor/stats.hpp"

namespace elfor {

/// Location and spread of vote share and relative turnout.
struct MomentEstimate {
  double mean_v = 0.0;
  double sd_v = 0.0;
  double mean_t = 0.0;
  double sd_t = 0.0;

  bool operator==(const MomentEstimate&) const = default;
};

enum class MomentMethod { raw, trimmed };

/// Population mean and sd of v and t over stations where both are defined.
/// `trimmed` re-estimates five times on stations within 3 sd of the current
/// estimate in both variables.
inline MomentEstimate estimate_moments(std::span<const StationRecord> records,
                                       MomentMethod method = MomentMethod::raw) {
  std::vector<double> v, t;
  for (const auto& r : records) {
    if (!r.has_vote_share() || !r.has_turnout()) continue;
    v.push_back(r.vote_share);
    t.push_back(r.rel_turnout);
  }
  if (v.size() < 2) throw InsufficientDataError("estimate_moments: fewer than 2 usable stations");

  auto estimate = [](std::span<const double> vs, std::span<const double> ts) {
    const auto mv = stats::mean_sd(vs);
    const auto mt = stats::mean_sd(ts);
    if (!(mv.sd > 0.0) || !(mt.sd > 0.0)) throw InsufficientDataError("estimate_moments: zero spread");
    return MomentEstimate{mv.mean, mv.sd, mt.mean, mt.sd};
  };
  auto m = estimate(v, t);
  if (method == MomentMethod::trimmed) {
    for (int round = 0; round < 5; ++round) {
      std::vector<double> v2, t2;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (std::abs(v[i] - m.mean_v) <= 3.0 * m.sd_v && std::abs(t[i] - m.mean_t) <= 3.0 * m.sd_t) {
          v2.push_back(v[i]);
          t2.push_back(t[i]);
        }
      }
      if (v2.size() < 2) throw InsufficientDataError("estimate_moments: trimming left fewer than 2 stations");
      m = estimate(v2, t2);
    }
  }
  return m;
}

/// Fraction of incrementally stuffed stations `f`, of extremely stuffed
/// stations `f_extreme`, and the flip exponent `alpha`.
struct StuffingParams {
  double f = 0.0;
  double f_extreme = 0.0;
  double alpha = 1.0;

  void validate() const {
    if (!(f >= 0.0 && f <= 1.0)) throw InvalidArgument("stuffing: f outside [0,1]");
    if (!(f_extreme >= 0.0 && f_extreme <= 1.0)) throw InvalidArgument("stuffing: f_extreme outside [0,1]");
    if (f + f_extreme > 1.0 + 1e-12) throw InvalidArgument("stuffing: f + f_extreme exceeds 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("stuffing: alpha must be positive");
  }
  bool operator==(const StuffingParams&) const = default;
};

struct StationCounts {
  Count eligible = 0;
  Count turnout = 0;
  Count yes = 0;
  bool operator==(const StationCounts&) const = default;
};

/// Stuffs round(x (N - T)) ballots for 'Yes' and flips round(x^alpha (T - V))
/// 'No' votes. The result keeps 0 <= V <= T <= N for every x in [0,1].
inline StationCounts apply_fraud(StationCounts honest, double intensity, double alpha) {
  const Count stuffed = std::llround(intensity * static_cast<double>(honest.eligible - honest.turnout));
  const Count flipped = std::llround(std::pow(intensity, alpha) * static_cast<double>(honest.turnout - honest.yes));
  return {honest.eligible, honest.turnout + stuffed, honest.yes + stuffed + flipped};
}

/// Every random variate one simulated station consumes. The set drawn does not
/// depend on the fraud parameters, so raising f only moves stations from honest
/// to stuffed.
struct StationDraw {
  double turnout = 0.0;  // ideal t
  double vote = 0.0;     // ideal v
  double selector = 0.0;
  double incremental_intensity = 0.0;
  double extreme_intensity = 0.0;
};

enum class FraudClass { honest, incremental, extreme };

inline FraudClass classify(const StationDraw& d, const StuffingParams& p) {
  if (d.selector < p.f) return FraudClass::incremental;
  if (d.selector >= 1.0 - p.f_extreme && p.f_extreme > 0.0) return FraudClass::extreme;
  return FraudClass::honest;
}

inline constexpr std::uint64_t kStationDomain = 0x5354'4154'494f'4e00ULL;
inline constexpr std::uint64_t kReplicateDomain = 0x5245'504c'4943'4100ULL;

struct ForwardOptions {
  double extreme_spread = 0.075;  // sd of the half-normal gap between extreme intensity and 1
  unsigned threads = 1;
};

/// Intensity near 1: 1 - |Normal(0, spread)|, redrawn until inside [0,1].
inline double draw_extreme_intensity(Stream& rng, double spread) {
  for (;;) {
    const double gap = std::abs(rng.normal(0.0, spread));
    if (gap <= 1.0) return 1.0 - gap;
  }
}

inline StationDraw draw_station(Stream& rng, const MomentEstimate& m, double extreme_spread) {
  StationDraw d;
  d.turnout = truncated_normal(rng, m.mean_t, m.sd_t);
  d.vote = truncated_normal(rng, m.mean_v, m.sd_v);
  d.selector = rng.uniform();
  d.incremental_intensity = rng.uniform();
  d.extreme_intensity = draw_extreme_intensity(rng, extreme_spread);
  return d;
}

inline StationCounts honest_counts(const StationDraw& d, Count eligible) {
  const Count t = std::llround(d.turnout * static_cast<double>(eligible));
  const Count v = std::llround(d.vote * static_cast<double>(t));
  return {eligible, t, v};
}

inline StationCounts station_outcome(const StationDraw& d, Count eligible, const StuffingParams& p) {
  const auto honest = honest_counts(d, eligible);
  switch (classify(d, p)) {
    case FraudClass::incremental: return apply_fraud(honest, d.incremental_intensity, p.alpha);
    case FraudClass::extreme: return apply_fraud(honest, d.extreme_intensity, p.alpha);
    case FraudClass::honest: break;
  }
  return honest;
}

inline void validate_model_moments(const MomentEstimate& m) {
  if (!(m.sd_v > 0.0) || !(m.sd_t > 0.0)) throw InvalidArgument("stuffing: spreads must be positive");
  if (!std::isfinite(m.mean_v) || !std::isfinite(m.mean_t)) throw InvalidArgument("stuffing: means must be finite");
}

/// Draws for stations [0, n) of the stream family `seed`.
inline std::vector<StationDraw> draw_stations(const MomentEstimate& m, std::size_t n, std::uint64_t seed,
                                              const ForwardOptions& opt = {}) {
  std::vector<StationDraw> draws(n);
  parallel_for(n, opt.threads, [&](std::size_t i) {
    Stream rng(seed, kStationDomain, i);
    draws[i] = draw_station(rng, m, opt.extreme_spread);
  });
  return draws;
}

/// Forward ballot-stuffing model. `moments` parameterize the untruncated
/// normals; ideal rates are redrawn until they fall inside [0,1].
inline std::vector<StationRecord> simulate_forward(const MomentEstimate& moments, const StuffingParams& params,
                                                   std::span<const Count> sizes, std::uint64_t seed,
                                                   const ForwardOptions& opt = {}) {
  params.validate();
  validate_model_moments(moments);
  if (sizes.empty()) throw InvalidArgument("simulate_forward: no station sizes");
  for (Count n : sizes)
    if (n < 0) throw InvalidArgument("simulate_forward: negative station size");
  const auto draws = draw_stations(moments, sizes.size(), seed, opt);
  std::vector<StationRecord> out;
  out.reserve(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto c = station_outcome(draws[i], sizes[i], params);
    out.push_back(make_station({"sim", "sim", "sim", std::to_string(i)}, c.eligible, c.turnout, c.yes));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

enum class FitTarget { vote_share, fingerprint };

struct FitConfig {
  std::size_t replicates = 10;
  std::uint64_t seed = 1;
  SimplexOptions simplex{};
  StuffingParams start{0.01, 0.001, 1.0};
  std::array<double, 3> steps{0.05, 0.01, 0.5};
  double alpha_min = 0.1;
  double alpha_max = 10.0;
  std::size_t bins = 100;
  std::size_t turnout_bands = 5;  // fingerprint target: turnout bands cut at observed quantiles
  FitTarget target = FitTarget::fingerprint;
  MomentMethod moments = MomentMethod::raw;
  bool correct_truncation = true;  // map data moments to the parent normal before simulating
  // Alternate the simplex search with re-estimating the honest-component
  // moments so that the simulated election (fraud included) reproduces the
  // observed moments. Zero rounds uses the data moments as they are.
  int moment_rounds = 10;
  int moment_iterations = 12;
  // The model election repeats the observed size list this many times.
  std::size_t simulation_multiplier = 1;
  double extreme_spread = 0.075;
  unsigned threads = 1;
};

struct ReplicateEstimate {
  std::uint64_t seed = 0;
  StuffingParams params;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct StuffingFit {
  StuffingParams params;       // mean over replicates
  StuffingParams uncertainty;  // sample sd over replicates
  double objective = 0.0;      // mean replicate objective
  MomentEstimate data_moments;
  MomentEstimate model_moments;
  std::vector<ReplicateEstimate> replicates;
};

class StuffingFitError : public Error {
 public:
  StuffingFitError(const std::string& what, StuffingFit best) : Error(what), best_(std::move(best)) {}
  const StuffingFit& best_so_far() const noexcept { return best_; }

 private:
  StuffingFit best_;
};

/// Discrepancy between the observed histogram and the model histogram for one
/// fixed random stream. Deterministic in the parameters.
class StuffingObjective {
 public:
  StuffingObjective(std::span<const StationRecord> observed, const MomentEstimate& model_moments,
                    std::uint64_t seed, FitTarget target = FitTarget::fingerprint, std::size_t bins = 100,
                    std::size_t turnout_bands = 5, const ForwardOptions& opt = {},
                    std::size_t multiplier = 1)
      : bins_(bins) {
    if (multiplier == 0) throw InvalidArgument("stuffing objective: zero simulation multiplier");
    validate_model_moments(model_moments);
    if (bins == 0) throw InvalidArgument("stuffing objective: zero bins");
    if (target == FitTarget::fingerprint) {
      if (turnout_bands == 0) throw InvalidArgument("stuffing objective: zero turnout bands");
      std::vector<double> ts;
      for (const auto& r : observed)
        if (r.has_vote_share() && r.has_turnout()) ts.push_back(r.rel_turnout);
      if (ts.empty()) throw InsufficientDataError("stuffing objective: no stations with votes");
      std::sort(ts.begin(), ts.end());
      for (std::size_t k = 1; k < turnout_bands; ++k)
        band_edges_.push_back(stats::quantile_sorted(ts, static_cast<double>(k) / static_cast<double>(turnout_bands)));
    }
    sizes_.reserve(observed.size() * multiplier);
    for (std::size_t c = 0; c < multiplier; ++c)
      for (const auto& r : observed) sizes_.push_back(r.eligible);
    draws_ = draw_stations(model_moments, sizes_.size(), seed, opt);
    honest_.reserve(sizes_.size());
    for (std::size_t i = 0; i < sizes_.size(); ++i) honest_.push_back(honest_counts(draws_[i], sizes_[i]));

    observed_.assign(cells(), 0.0);
    std::size_t used = 0;
    for (const auto& r : observed) {
      if (!r.has_vote_share()) continue;
      observed_[cell_of(r.vote_share, r.rel_turnout)] += 1.0;
      ++used;
    }
    if (used == 0) throw InsufficientDataError("stuffing objective: no stations with votes");
    for (auto& h : observed_) h /= static_cast<double>(used);
  }

  double operator()(const StuffingParams& p) const {
    std::vector<double> sim(cells(), 0.0);
    std::size_t used = 0;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      const auto cls = classify(draws_[i], p);
      StationCounts c = honest_[i];
      if (cls == FraudClass::incremental) c = apply_fraud(c, draws_[i].incremental_intensity, p.alpha);
      else if (cls == FraudClass::extreme) c = apply_fraud(c, draws_[i].extreme_intensity, p.alpha);
      if (c.turnout == 0) continue;
      const double v = static_cast<double>(c.yes) / static_cast<double>(c.turnout);
      const double t = c.eligible > 0 ? static_cast<double>(c.turnout) / static_cast<double>(c.eligible) : 0.0;
      sim[cell_of(v, t)] += 1.0;
      ++used;
    }
    double ss = 0.0;
    const double norm = used > 0 ? 1.0 / static_cast<double>(used) : 0.0;
    for (std::size_t k = 0; k < sim.size(); ++k) {
      const double d = observed_[k] - sim[k] * norm;
      ss += d * d;
    }
    return ss;
  }

 private:
  std::size_t cells() const { return bins_ * (band_edges_.size() + 1); }
  std::size_t bin(double x) const {
    const auto i = static_cast<std::size_t>(std::clamp(x, 0.0, 1.0) * static_cast<double>(bins_));
    return std::min(i, bins_ - 1);
  }
  std::size_t cell_of(double v, double t) const {
    const auto band = static_cast<std::size_t>(std::upper_bound(band_edges_.begin(), band_edges_.end(), t) - band_edges_.begin());
    return band * bins_ + bin(v);
  }

  std::size_t bins_;
  std::vector<double> band_edges_;
  std::vector<Count> sizes_;
  std::vector<StationDraw> draws_;
  std::vector<StationCounts> honest_;
  std::vector<double> observed_;
};

/// Parent-normal moments the simulation uses for the given data moments.
inline MomentEstimate model_moments_for(const MomentEstimate& data, bool correct_truncation) {
  if (!correct_truncation) return data;
  // Moments no truncated normal can produce are used as they are.
  const auto v = stats::untruncate_moments({data.mean_v, data.sd_v}).value_or(stats::MeanSd{data.mean_v, data.sd_v});
  const auto t = stats::untruncate_moments({data.mean_t, data.sd_t}).value_or(stats::MeanSd{data.mean_t, data.sd_t});
  return {v.mean, v.sd, t.mean, t.sd};
}

/// Mean and sd of v and t of the election the model produces.
inline MomentEstimate simulated_moments(const MomentEstimate& model, const StuffingParams& p,
                                        std::span<const Count> sizes, std::uint64_t seed,
                                        const ForwardOptions& opt = {}) {
  const auto draws = draw_stations(model, sizes.size(), seed, opt);
  std::vector<double> v, t;
  v.reserve(sizes.size());
  t.reserve(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto c = station_outcome(draws[i], sizes[i], p);
    if (c.turnout == 0 || c.eligible == 0) continue;
    v.push_back(static_cast<double>(c.yes) / static_cast<double>(c.turnout));
    t.push_back(static_cast<double>(c.turnout) / static_cast<double>(c.eligible));
  }
  if (v.size() < 2) throw InsufficientDataError("simulated election has fewer than 2 usable stations");
  const auto mv = stats::mean_sd(v);
  const auto mt = stats::mean_sd(t);
  return {mv.mean, mv.sd, mt.mean, mt.sd};
}

/// Honest-component moments for which the model with fraud parameters `p`
/// reproduces the target moments. Fixed-point iteration on the common stream `seed`.
inline MomentEstimate match_moments(const MomentEstimate& target, MomentEstimate model, const StuffingParams& p,
                                    std::span<const Count> sizes, std::uint64_t seed, int iterations,
                                    const ForwardOptions& opt = {}) {
  for (int k = 0; k < iterations; ++k) {
    const auto sim = simulated_moments(model, p, sizes, seed, opt);
    model.mean_v += target.mean_v - sim.mean_v;
    model.mean_t += target.mean_t - sim.mean_t;
    model.sd_v *= target.sd_v / sim.sd_v;
    model.sd_t *= target.sd_t / sim.sd_t;
    if (std::abs(target.mean_v - sim.mean_v) + std::abs(target.mean_t - sim.mean_t) +
            std::abs(target.sd_v - sim.sd_v) + std::abs(target.sd_t - sim.sd_t) < 1e-6)
      break;
  }
  return model;
}

/// Fits (f, f_extreme, alpha) by simplex search, once per replicate stream.
/// Point estimate and uncertainty are the mean and sample sd over replicates.
inline StuffingFit fit_stuffing(std::span<const StationRecord> records, const FitConfig& cfg = {}) {
  if (cfg.replicates == 0) throw InvalidArgument("fit_stuffing: zero replicates");
  StuffingFit fit;
  fit.data_moments = estimate_moments(records, cfg.moments);
  const MomentEstimate initial_model = model_moments_for(fit.data_moments, cfg.correct_truncation);
  fit.replicates.resize(cfg.replicates);

  if (cfg.simulation_multiplier == 0) throw InvalidArgument("fit_stuffing: zero simulation multiplier");
  std::vector<Count> sizes;
  sizes.reserve(records.size() * cfg.simulation_multiplier);
  for (std::size_t c = 0; c < cfg.simulation_multiplier; ++c)
    for (const auto& r : records) sizes.push_back(r.eligible);

  const std::vector<double> lower{0.0, 0.0, cfg.alpha_min};
  const std::vector<double> upper{1.0, 1.0, cfg.alpha_max};
  const ForwardOptions fwd{cfg.extreme_spread, 1};

  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    const std::uint64_t seed = stream_key(cfg.seed, kReplicateDomain, r);
    MomentEstimate model = initial_model;
    StuffingParams x = cfg.start;
    x.f_extreme = 0.0;
    SimplexResult res;
    bool converged = true;

    // One simplex search on the current model moments. Without the extreme
    // component the search runs over (f, alpha) with f_extreme pinned at 0.
    auto search = [&](const StuffingParams& from, bool with_extreme) {
      const StuffingObjective objective(records, model, seed, cfg.target, cfg.bins, cfg.turnout_bands, fwd,
                                        cfg.simulation_multiplier);
      if (!with_extreme) {
        auto obj2 = [&](const std::vector<double>& y) { return objective({y[0], 0.0, y[1]}); };
        auto r2 = nelder_mead(obj2, {from.f, from.alpha}, {cfg.steps[0], cfg.steps[2]}, {lower[0], lower[2]},
                              {upper[0], upper[2]}, cfg.simplex);
        res = {{r2.x[0], 0.0, r2.x[1]}, r2.value, r2.iterations, r2.evaluations, r2.converged};
      } else {
        auto obj3 = [&](const std::vector<double>& y) {
          const double excess = y[0] + y[1] - 1.0;
          if (excess > 0.0) return 1e3 * (1.0 + excess);
          return objective({y[0], y[1], y[2]});
        };
        res = nelder_mead(obj3, {from.f, from.f_extreme, from.alpha}, {cfg.steps[0], cfg.steps[1], cfg.steps[2]},
                          lower, upper, cfg.simplex);
      }
      converged = converged && res.converged;
      const StuffingParams found{res.x[0], res.x[1], res.x[2]};
      const double moved =
          std::abs(found.f - from.f) + std::abs(found.f_extreme - from.f_extreme) + std::abs(found.alpha - from.alpha) / 10.0;
      x = found;
      return moved;
    };
    auto rematch = [&] {
      model = match_moments(fit.data_moments, model, x, sizes, seed, cfg.moment_iterations, fwd);
    };

    // Stage 1: incremental fraud only, alternating with the moment update.
    for (int round = 0; round <= cfg.moment_rounds; ++round) {
      const double moved = search(x, false);
      if (!converged || round == cfg.moment_rounds || (round > 0 && moved < 1e-5)) break;
      rematch();
    }
    // Stage 2: release the extreme component from the stage-1 optimum.
    if (converged) {
      StuffingParams from = x;
      from.f_extreme = cfg.start.f_extreme;
      search(from, true);
      for (int round = 0; converged && round < 2 && cfg.moment_rounds > 0; ++round) {
        rematch();
        if (search(x, true) < 1e-5) break;
      }
    }
    fit.replicates[r] = {seed, x, res.value, res.iterations, converged};
  });
  fit.model_moments = initial_model;

  const auto n = static_cast<double>(cfg.replicates);
  auto spread = [&](auto get, double mean) {
    if (cfg.replicates < 2) return 0.0;
    double ss = 0.0;
    for (const auto& e : fit.replicates) ss += (get(e) - mean) * (get(e) - mean);
    return std::sqrt(ss / (n - 1.0));
  };
  auto mean_of = [&](auto get) {
    double s = 0.0;
    for (const auto& e : fit.replicates) s += get(e);
    return s / n;
  };
  auto get_f = [](const ReplicateEstimate& e) { return e.params.f; };
  auto get_fe = [](const ReplicateEstimate& e) { return e.params.f_extreme; };
  auto get_a = [](const ReplicateEstimate& e) { return e.params.alpha; };
  fit.params = {mean_of(get_f), mean_of(get_fe), mean_of(get_a)};
  fit.uncertainty = {spread(get_f, fit.params.f), spread(get_fe, fit.params.f_extreme),
                     spread(get_a, fit.params.alpha)};
  fit.objective = mean_of([](const ReplicateEstimate& e) { return e.objective; });

  for (const auto& e : fit.replicates)
    if (!e.converged)
      throw StuffingFitError("fit_stuffing: simplex did not converge within " +
                                 std::to_string(cfg.simplex.max_iterations) + " iterations (replicate seed " +
                                 std::to_string(e.seed) + ")",
                             fit);
  return fit;
}

}  // namespace elfor
