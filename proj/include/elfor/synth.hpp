#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "elfor/error.hpp"
#include "elfor/ingest.hpp"
#include "elfor/parallel.hpp"
#include "elfor/random.hpp"
#include "elfor/rigging.hpp"
#include "elfor/stuffing.hpp"

namespace elfor {

/// Parameters of a synthetic election. Moments are national totals: district
/// means scatter around the national means by the district spreads, villages
/// scatter around their district with the remaining spread.
struct SyntheticSpec {
  std::size_t provinces = 10;
  std::size_t districts_per_province = 10;
  std::size_t villages_per_district = 20;
  std::size_t stations_per_village = 5;

  // Log-normal electorate law; defaults give mean 332 and sd 109.
  double size_log_mean = 5.753951633182319;
  double size_log_sd = 0.31994791993125843;
  Count size_floor = 100;
  Count size_cap = 5000;

  double mean_v = 0.53;
  double sd_v = 0.23;
  double mean_t = 0.86;
  double sd_t = 0.085;
  double district_spread_v = 0.1;
  double district_spread_t = 0.03;

  StuffingParams stuffing{0.0, 0.0, 1.0};
  double extreme_spread = 0.075;

  // Stations at or below the rig_percentile-th size percentile get their rates
  // raised by (rig_dv, rig_dt). Zero percentile disables the injector.
  double rig_percentile = 0.0;
  double rig_dv = 0.0;
  double rig_dt = 0.0;

  std::uint64_t seed = 1;
  unsigned threads = 1;

  std::size_t station_count() const {
    return provinces * districts_per_province * villages_per_district * stations_per_village;
  }

  void validate() const {
    if (station_count() == 0) throw InvalidArgument("synth: every hierarchy count must be positive");
    if (size_floor < 1 || size_cap < size_floor) throw InvalidArgument("synth: need 1 <= size_floor <= size_cap");
    if (!(size_log_sd >= 0.0)) throw InvalidArgument("synth: size_log_sd must be non-negative");
    for (double m : {mean_v, mean_t})
      if (!(m >= 0.0 && m <= 1.0)) throw InvalidArgument("synth: means must lie in [0,1]");
    if (!(sd_v > 0.0 && sd_t > 0.0)) throw InvalidArgument("synth: spreads must be positive");
    if (!(district_spread_v >= 0.0 && district_spread_t >= 0.0))
      throw InvalidArgument("synth: district spreads must be non-negative");
    if (district_spread_v >= sd_v || district_spread_t >= sd_t)
      throw InvalidArgument("synth: district spread must be below the national spread");
    if (!(rig_percentile >= 0.0 && rig_percentile < 100.0)) throw InvalidArgument("synth: rig_percentile outside [0,100)");
    for (double d : {rig_dv, rig_dt})
      if (!(d >= 0.0 && d <= 1.0)) throw InvalidArgument("synth: rigging shifts must lie in [0,1]");
    if (!(extreme_spread > 0.0)) throw InvalidArgument("synth: extreme_spread must be positive");
    stuffing.validate();
  }
};

struct SyntheticElection {
  std::vector<StationRecord> records;
  std::size_t stuffed_stations = 0;
  std::size_t rigged_stations = 0;
  std::size_t clamped_stations = 0;  // rigging pushed t or v past 1
};

/// Station layout: keys, electorates, and the village/district structure.
struct Layout {
  std::vector<RegionKey> keys;
  std::vector<Count> sizes;
  std::vector<std::vector<std::size_t>> villages;  // station indices
  std::vector<std::size_t> village_district;       // district index per village
  std::size_t districts = 0;
};

inline constexpr std::uint64_t kSizeDomain = 0x53495a45'00000000ULL;
inline constexpr std::uint64_t kDistrictDomain = 0x44495354'00000000ULL;
inline constexpr std::uint64_t kVillageDomain = 0x56494c4c'00000000ULL;
inline constexpr std::uint64_t kFraudDomain = 0x46524155'00000000ULL;

namespace detail {

inline std::string padded(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i + 1);
  return buf;
}

inline int digits(std::size_t n) { return n < 10 ? 1 : 1 + digits(n / 10); }

}  // namespace detail

/// Hierarchy of the spec with log-normal electorates.
inline Layout make_layout(const SyntheticSpec& spec) {
  spec.validate();
  Layout lay;
  const int wp = detail::digits(spec.provinces), wd = detail::digits(spec.districts_per_province),
            wv = detail::digits(spec.villages_per_district), ws = detail::digits(spec.stations_per_village);
  for (std::size_t p = 0; p < spec.provinces; ++p) {
    const auto prov = detail::padded("P", p, wp);
    for (std::size_t d = 0; d < spec.districts_per_province; ++d, ++lay.districts) {
      const auto dist = prov + "-" + detail::padded("D", d, wd);
      for (std::size_t v = 0; v < spec.villages_per_district; ++v) {
        const auto vil = dist + "-" + detail::padded("V", v, wv);
        lay.village_district.push_back(lay.districts);
        auto& members = lay.villages.emplace_back();
        for (std::size_t s = 0; s < spec.stations_per_village; ++s) {
          const std::size_t idx = lay.keys.size();
          members.push_back(idx);
          lay.keys.push_back({prov, dist, vil, detail::padded("", s, ws)});
          Stream rng(spec.seed, kSizeDomain, idx);
          const double n = std::exp(rng.normal(spec.size_log_mean, spec.size_log_sd));
          lay.sizes.push_back(std::clamp<Count>(std::llround(n), spec.size_floor, spec.size_cap));
        }
      }
    }
  }
  return lay;
}

/// Layout of an existing dataset (its region keys and electorates).
inline Layout layout_of(std::span<const StationRecord> records) {
  Layout lay;
  for (const auto& r : records) {
    lay.keys.push_back(r.region);
    lay.sizes.push_back(r.eligible);
  }
  const auto districts = group_indices(records, district_key);
  lay.districts = districts.size();
  std::vector<std::size_t> district_of(records.size());
  for (std::size_t d = 0; d < districts.size(); ++d)
    for (auto i : districts[d]) district_of[i] = d;
  lay.villages = group_indices(records, village_key);
  for (const auto& v : lay.villages) lay.village_district.push_back(district_of[v.front()]);
  return lay;
}

/// Fills a layout with votes. Honest counts: each village draws latent rates
/// around its district's means; T_i ~ Binomial(N_i, t_village); the village's
/// 'Yes' total ~ Binomial(sum T, v_village) is dealt to stations by random
/// assignment (sequential hypergeometric draws). Fraud then applies the
/// stuffing mechanism per station, and rigging shifts small stations' rates.
inline SyntheticElection generate(const Layout& lay, const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = lay.keys.size();
  if (n == 0) throw InvalidArgument("synth: empty layout");

  struct DistrictMeans {
    double v, t;
  };
  std::vector<DistrictMeans> dm(lay.districts);
  for (std::size_t d = 0; d < lay.districts; ++d) {
    Stream rng(spec.seed, kDistrictDomain, d);
    // District means are kept inside (0,1) so the village law has mass there.
    dm[d].v = truncated_normal(rng, spec.mean_v, spec.district_spread_v, 0.0, 1.0);
    dm[d].t = truncated_normal(rng, spec.mean_t, spec.district_spread_t, 0.0, 1.0);
  }
  const double within_v = std::sqrt(spec.sd_v * spec.sd_v - spec.district_spread_v * spec.district_spread_v);
  const double within_t = std::sqrt(spec.sd_t * spec.sd_t - spec.district_spread_t * spec.district_spread_t);

  std::vector<StationCounts> counts(n);
  std::vector<char> stuffed(n, 0);
  parallel_for(lay.villages.size(), spec.threads, [&](std::size_t vi) {
    const auto& members = lay.villages[vi];
    const auto& d = dm[lay.village_district[vi]];
    Stream rng(spec.seed, kVillageDomain, vi);
    const double t_vil = truncated_normal(rng, d.t, within_t);
    const double v_vil = truncated_normal(rng, d.v, within_v);
    Count total = 0;
    for (auto i : members) {
      counts[i] = {lay.sizes[i], binomial(rng, lay.sizes[i], t_vil), 0};
      total += counts[i].turnout;
    }
    Count yes_left = binomial(rng, total, v_vil);
    Count left = total;
    for (auto i : members) {
      counts[i].yes = hypergeometric(rng, yes_left, left, counts[i].turnout);
      yes_left -= counts[i].yes;
      left -= counts[i].turnout;
    }
    for (auto i : members) {
      Stream srng(spec.seed, kFraudDomain, i);
      StationDraw draw;
      draw.selector = srng.uniform();
      draw.incremental_intensity = srng.uniform();
      draw.extreme_intensity = draw_extreme_intensity(srng, spec.extreme_spread);
      switch (classify(draw, spec.stuffing)) {
        case FraudClass::incremental:
          counts[i] = apply_fraud(counts[i], draw.incremental_intensity, spec.stuffing.alpha);
          stuffed[i] = 1;
          break;
        case FraudClass::extreme:
          counts[i] = apply_fraud(counts[i], draw.extreme_intensity, spec.stuffing.alpha);
          stuffed[i] = 1;
          break;
        case FraudClass::honest: break;
      }
    }
  });

  SyntheticElection out;
  for (char s : stuffed) out.stuffed_stations += static_cast<std::size_t>(s);

  if (spec.rig_percentile > 0.0 && (spec.rig_dv > 0.0 || spec.rig_dt > 0.0)) {
    std::vector<Count> sorted = lay.sizes;
    std::sort(sorted.begin(), sorted.end());
    const Count cutoff = nearest_rank(sorted, spec.rig_percentile);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = counts[i];
      if (c.eligible > cutoff || c.eligible == 0) continue;
      ++out.rigged_stations;
      const double t0 = static_cast<double>(c.turnout) / static_cast<double>(c.eligible);
      const double v0 = c.turnout > 0 ? static_cast<double>(c.yes) / static_cast<double>(c.turnout) : 0.0;
      const double t1 = t0 + spec.rig_dt, v1 = v0 + spec.rig_dv;
      if (t1 > 1.0 || v1 > 1.0) ++out.clamped_stations;
      c.turnout = std::llround(std::min(t1, 1.0) * static_cast<double>(c.eligible));
      c.yes = std::llround(std::min(v1, 1.0) * static_cast<double>(c.turnout));
    }
  }

  out.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.records.push_back(make_station(lay.keys[i], counts[i].eligible, counts[i].turnout, counts[i].yes));
  return out;
}

/// Generates the hierarchical synthetic election described by `spec`.
inline SyntheticElection generate_synthetic(const SyntheticSpec& spec) { return generate(make_layout(spec), spec); }

/// Same generator on the stations and hierarchy of an existing dataset.
inline SyntheticElection generate_like(std::span<const StationRecord> records, const SyntheticSpec& spec) {
  return generate(layout_of(records), spec);
}

}  // namespace elfor
