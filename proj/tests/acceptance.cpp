// Acceptance runner: one PASS/FAIL/SKIP line per criterion.
// Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "elfor/elfor.hpp"

using namespace elfor;

namespace {

enum class Outcome { pass, fail, skip };

struct Result {
  Outcome outcome;
  std::string detail;
};

unsigned worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Observed station moments of the reference election, and electorates drawn
// log-normally with mean 332 and sd 109, floored at 100.
const MomentEstimate kObserved{0.53, 0.23, 0.86, 0.085};

std::vector<Count> electorates(std::size_t n, std::uint64_t seed) {
  const double s2 = std::log1p((109.0 / 332.0) * (109.0 / 332.0));
  const double mu = std::log(332.0) - 0.5 * s2;
  std::vector<Count> sizes(n);
  for (std::size_t i = 0; i < n; ++i) {
    Stream rng(seed, 0x53495a45ULL, i);
    sizes[i] = std::max<Count>(100, std::llround(std::exp(rng.normal(mu, std::sqrt(s2)))));
  }
  return sizes;
}

std::vector<StationRecord> stuffed_election(double f, double alpha, std::uint64_t seed) {
  const auto model = model_moments_for(kObserved, true);
  const auto sizes = electorates(100000, seed);
  return simulate_forward(model, {f, 0.0, alpha}, sizes, stream_key(seed, 0x47454eULL, 0),
                          {0.075, worker_threads()});
}

FitConfig fit_config(std::uint64_t seed) {
  FitConfig cfg;
  cfg.seed = seed;
  cfg.threads = worker_threads();
  return cfg;
}

Result stuffing_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = stuffed_election(0.06, 1.3, 7);
  const auto fit = fit_stuffing(data, fit_config(101));
  const double secs = seconds_since(t0);
  const bool ok = std::abs(fit.params.f - 0.06) <= 0.02 && std::abs(fit.params.alpha - 1.3) <= 0.4 && secs < 600.0;
  return {ok ? Outcome::pass : Outcome::fail,
          fmt("f = %.4f +/- %.4f (|f - 0.06| <= 0.02), alpha = %.3f +/- %.3f (|alpha - 1.3| <= 0.4), f_e = %.4f, %.0f s (< 600 s)",
              fit.params.f, fit.uncertainty.f, fit.params.alpha, fit.uncertainty.alpha, fit.params.f_extreme, secs)};
}

Result stuffing_null() {
  int within = 0;
  std::ostringstream runs;
  for (std::uint64_t k = 0; k < 10; ++k) {
    const auto data = stuffed_election(0.0, 1.0, 200 + k);
    const auto fit = fit_stuffing(data, fit_config(300 + k));
    const bool in = fit.params.f <= 2.0 * fit.uncertainty.f;
    within += in;
    runs << (k ? ", " : "") << fmt("%.4f/%.4f%s", fit.params.f, fit.uncertainty.f, in ? "" : "*");
  }
  return {within >= 9 ? Outcome::pass : Outcome::fail,
          fmt("%d of 10 fits have f within 2 spreads of 0 (need >= 9); f/spread: ", within) + runs.str()};
}

Result rigging_detection() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto grid = default_p_grid();
  SyntheticSpec base;  // 10^4 stations
  base.threads = worker_threads();
  std::vector<DisplacementCurve> refs;
  for (std::uint64_t k = 0; k < 200; ++k) {
    auto s = base;
    s.seed = 10000 + k;
    refs.push_back(displacement_curve(generate_synthetic(s).records, grid));
  }
  const auto region = acceptance_region(refs, 0.95, "200 clean synthetic elections");

  auto rigged_spec = base;
  rigged_spec.seed = 20001;
  rigged_spec.rig_percentile = 10;
  rigged_spec.rig_dv = rigged_spec.rig_dt = 0.1;
  const auto rigged = displacement_curve(generate_synthetic(rigged_spec).records, grid);
  const auto k10 = static_cast<std::size_t>(std::find(region.p.begin(), region.p.end(), 10) - region.p.begin());
  const auto d10 = rigged.at(10);
  const bool exits = d10 && region.upper[k10] && *d10 > *region.upper[k10];

  auto held_out = base;
  held_out.seed = 20002;
  const auto clean = check_region(displacement_curve(generate_synthetic(held_out).records, grid), region);
  const double secs = seconds_since(t0);
  const bool ok = exits && clean.exit_fraction() <= 0.10 && secs < 900.0;
  return {ok ? Outcome::pass : Outcome::fail,
          fmt("rigged delta(10) = %.4f vs upper %.4f; held-out clean exits at %zu of %zu points (%.3f <= 0.10); %.0f s (< 900 s)",
              d10.value_or(NAN), region.upper[k10].value_or(NAN), clean.exits(), clean.compared,
              clean.exit_fraction(), secs)};
}

Result benford_correctness() {
  // independent evaluation in extended precision
  const auto b = benford_second_digit_probabilities();
  double worst = 0.0;
  for (int d = 0; d < 10; ++d) {
    long double ref = 0.0L;
    for (int k = 1; k <= 9; ++k) ref += std::log10(1.0L + 1.0L / (10.0L * k + d));
    worst = std::max(worst, static_cast<double>(std::abs(static_cast<long double>(b[d]) - ref)));
  }

  // log-uniform on [100, 10^5) has exactly Benford second digits
  int accepted = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    std::vector<Count> values(10000);
    for (std::size_t i = 0; i < values.size(); ++i) {
      Stream rng(trial, 0x42454e46ULL, i);
      values[i] = static_cast<Count>(std::floor(std::pow(10.0, 2.0 + 3.0 * rng.uniform())));
    }
    accepted += benford_test(values).posterior > 0.5;
  }

  const std::vector<Count> degenerate(10000, 130);
  const auto deg = benford_test(degenerate);
  const bool ok = worst <= 1e-12 && accepted >= 60 && deg.posterior < 1e-10;
  return {ok ? Outcome::pass : Outcome::fail,
          fmt("max |b_d - ref| = %.2e (<= 1e-12); posterior > 0.5 in %d of 100 trials (>= 60); degenerate posterior 10^%.1f (< 1e-10)",
              worst, accepted, deg.log10_posterior)};
}

Result assignment_calibration() {
  SyntheticSpec s;  // 10^4 stations, votes dealt by hypergeometric draws within villages
  s.seed = 4242;
  const auto e = generate_synthetic(s);
  const auto res = assignment_test(e.records);
  const bool ok = res.exceedance_fraction >= 0.005 && res.exceedance_fraction <= 0.015;
  return {ok ? Outcome::pass : Outcome::fail,
          fmt("%zu of %zu stations exceed |z| > 2.576: %.4f in [0.005, 0.015]", res.exceed_count,
              res.tested_stations, res.exceedance_fraction)};
}

Result invariant_suites() {
  std::vector<std::string> broken;
  std::size_t checked = 0;

  // 0 <= V <= T <= N for every simulation output
  const auto sizes = electorates(5000, 1);
  for (std::uint64_t k = 0; k < 40; ++k) {
    Stream rng(k, 0x494e56ULL, 0);
    const double fe = 0.3 * rng.uniform();
    const StuffingParams p{(1.0 - fe) * rng.uniform(), fe, 0.2 + 4.0 * rng.uniform()};
    for (const auto& r : simulate_forward(kObserved, p, sizes, k)) {
      ++checked;
      if (!(0 <= r.yes && r.yes <= r.turnout && r.turnout <= r.eligible)) broken.push_back("forward counts");
    }
    SyntheticSpec s;
    s.provinces = 1;
    s.seed = k;
    s.stuffing = p;
    s.rig_percentile = 50 * rng.uniform();
    s.rig_dv = rng.uniform();
    s.rig_dt = rng.uniform();
    for (const auto& r : generate_synthetic(s).records) {
      ++checked;
      if (!(0 <= r.yes && r.yes <= r.turnout && r.turnout <= r.eligible)) broken.push_back("synthetic counts");
    }
  }

  // Z-scores unchanged under per-district affine maps with positive scale
  SyntheticSpec s;
  s.provinces = 2;
  const auto e = generate_synthetic(s);
  const auto z0 = standardize_scores(e.records);
  auto mapped = e.records;
  for (auto& r : mapped) {
    const double a = 0.5 + static_cast<double>(std::hash<std::string>{}(r.region.district) % 7);
    const double c = -3.0 + static_cast<double>(std::hash<std::string>{}(r.region.district) % 5);
    r.vote_share = a * r.vote_share + c;
    r.rel_turnout = a * r.rel_turnout - c;
  }
  const auto z1 = standardize_scores(mapped);
  if (z0.scores.size() != z1.scores.size()) broken.push_back("affine: score count");
  for (std::size_t i = 0; i < std::min(z0.scores.size(), z1.scores.size()); ++i) {
    ++checked;
    if (std::abs(z0.scores[i].z_v - z1.scores[i].z_v) > 1e-9 || std::abs(z0.scores[i].z_t - z1.scores[i].z_t) > 1e-9)
      broken.push_back("affine: z changed");
  }

  // negating every score negates delta
  const auto grid = default_p_grid();
  auto sized = sized_scores(e.records, z0);
  const auto d0 = displacement_curve(std::span<const SizedScore>(sized), grid);
  for (auto& x : sized) x = {-x.z_v, -x.z_t, x.size};
  const auto d1 = displacement_curve(std::span<const SizedScore>(sized), grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    ++checked;
    if (d0.points[k].delta.has_value() != d1.points[k].delta.has_value() ||
        (d0.points[k].delta && std::abs(*d0.points[k].delta + *d1.points[k].delta) > 1e-12))
      broken.push_back("delta antisymmetry");
  }

  // fixed seeds give identical outputs at any thread count
  for (unsigned threads : {2u, 3u, 8u}) {
    ++checked;
    auto a = s, b = s;
    a.stuffing = b.stuffing = {0.1, 0.02, 1.3};
    b.threads = threads;
    if (generate_synthetic(a).records != generate_synthetic(b).records) broken.push_back("synth thread determinism");
    if (simulate_forward(kObserved, {0.1, 0.02, 1.3}, sizes, 9, {0.075, 1}) !=
        simulate_forward(kObserved, {0.1, 0.02, 1.3}, sizes, 9, {0.075, threads}))
      broken.push_back("forward thread determinism");
    if (!(compute_fingerprint(std::span<const StationRecord>(e.records), Geometry::raw_default(), 1) ==
          compute_fingerprint(std::span<const StationRecord>(e.records), Geometry::raw_default(), threads)))
      broken.push_back("fingerprint thread determinism");
  }
  {
    ++checked;
    const auto data = simulate_forward(kObserved, {0.06, 0.0, 1.3}, electorates(3000, 2), 3);
    FitConfig cfg;
    cfg.replicates = 3;
    cfg.moment_rounds = 2;
    const auto a = fit_stuffing(data, cfg);
    cfg.threads = 3;
    const auto b = fit_stuffing(data, cfg);
    if (!(a.params == b.params && a.uncertainty == b.uncertainty)) broken.push_back("fit thread determinism");
  }

  std::sort(broken.begin(), broken.end());
  broken.erase(std::unique(broken.begin(), broken.end()), broken.end());
  std::string what;
  for (const auto& b : broken) what += (what.empty() ? "" : ", ") + b;
  return {broken.empty() ? Outcome::pass : Outcome::fail,
          fmt("%zu checks; counts, affine invariance, antisymmetry, thread determinism", checked) +
              (broken.empty() ? "" : "; broken: " + what)};
}

// Reproduction on the official station file, when one is supplied:
//   ELFOR_DATA_FILE   path to the station-level results
//   ELFOR_DATA_FORMAT optional JSON format mapping (delimiter, columns)
Result official_data() {
  const char* path = std::getenv("ELFOR_DATA_FILE");
  if (!path || !*path) return {Outcome::skip, "set ELFOR_DATA_FILE to the station-level results to run"};
  FormatConfig format;
  if (const char* fj = std::getenv("ELFOR_DATA_FORMAT"); fj && *fj) format = json::parse(fj).get<FormatConfig>();
  const auto raw = read_inputs({path}, format);
  const auto records = filter_stations(raw, 100).retained;
  std::vector<std::string> missed;

  const auto sum = summarize(records);
  auto near = [](double x, double target, double half_unit) { return std::abs(x - target) <= half_unit; };
  if (!(near(sum.eligible.mean, 332, 0.5) && near(sum.eligible.sd, 109, 0.5) && near(sum.rel_turnout.mean, 0.86, 0.005) &&
        near(sum.rel_turnout.sd, 0.085, 0.0005) && near(sum.vote_share.mean, 0.53, 0.005) &&
        near(sum.vote_share.sd, 0.23, 0.005)))
    missed.push_back("descriptive statistics");

  FitConfig cfg = fit_config(1);
  const auto fit = fit_stuffing(records, cfg);
  if (std::abs(fit.params.f - 0.058) > std::max(0.019, fit.uncertainty.f) ||
      std::abs(fit.params.alpha - 1.3) > std::max(0.2, fit.uncertainty.alpha))
    missed.push_back("stuffing parameters");

  const auto grid = default_p_grid();
  RiggingStage stage;
  const auto refs = synthetic_reference_curves(records, baseline_spec(stage, sum), stage.baseline_count, 1, grid,
                                               worker_threads());
  const auto region = acceptance_region(refs, 0.95);
  const auto chk = check_region(displacement_curve(records, grid), region);
  const bool small_exit = std::any_of(chk.above.begin(), chk.above.end(), [](int p) { return p <= 10; });
  if (!small_exit) missed.push_back("displacement at small p");

  const auto bs = benford_test(station_yes_counts(records), AggregationLevel::station);
  const auto bv = benford_test(village_yes_totals(records), AggregationLevel::village);
  if (!(bs.log10_posterior < -100 && bv.log10_posterior < -10)) missed.push_back("benford posteriors");

  // Descending size: after a 1% burn-in the curve sits at or below 0.5 until
  // the last quarter of ranks (the small stations).
  const auto cum = cumulative_curve(records, CurveMode::by_size_rank);
  const std::size_t n = cum.points.size();
  bool early_crossing = false;
  for (std::size_t k = n / 100; k < (3 * n) / 4; ++k) early_crossing |= cum.points[k].cumulative > 0.5;
  if (early_crossing || !(cum.final_value() > 0.5) || std::abs(cum.final_value() - 0.514) > 0.0005)
    missed.push_back("cumulative by size rank");

  std::string what;
  for (const auto& m : missed) what += (what.empty() ? "" : ", ") + m;
  return {missed.empty() ? Outcome::pass : Outcome::fail,
          fmt("N %.1f/%.1f t %.3f/%.4f v %.3f/%.3f; f = %.4f +/- %.4f, alpha = %.3f +/- %.3f; run above %zu; "
              "log10 P(H0) station %.1f village %.1f; final cumulative %.4f",
              sum.eligible.mean, sum.eligible.sd, sum.rel_turnout.mean, sum.rel_turnout.sd, sum.vote_share.mean,
              sum.vote_share.sd, fit.params.f, fit.uncertainty.f, fit.params.alpha, fit.uncertainty.alpha,
              chk.longest_run_above, bs.log10_posterior, bv.log10_posterior, cum.final_value()) +
              (missed.empty() ? "" : "; missed: " + what)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
      {"stuffing-round-trip", stuffing_round_trip},
      {"stuffing-null", stuffing_null},
      {"rigging-detection", rigging_detection},
      {"benford-correctness", benford_correctness},
      {"assignment-calibration", assignment_calibration},
      {"invariant-suites", invariant_suites},
      {"official-data", official_data},
  };
  const std::string only = argc > 1 ? argv[1] : "";
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && name != only) continue;
    Result r;
    try {
      r = run();
    } catch (const std::exception& e) {
      r = {Outcome::fail, std::string("error: ") + e.what()};
    }
    const char* tag = r.outcome == Outcome::pass ? "PASS" : r.outcome == Outcome::fail ? "FAIL" : "SKIP";
    failures += r.outcome == Outcome::fail;
    std::cout << tag << ' ' << name << ": " << r.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
