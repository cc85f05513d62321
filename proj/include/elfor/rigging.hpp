#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "elfor/error.hpp"
#include "elfor/fingerprint.hpp"
#include "elfor/ingest.hpp"
#include "elfor/parallel.hpp"
#include "elfor/stats.hpp"

namespace elfor {

struct SizedScore {
  double z_v = 0.0;
  double z_t = 0.0;
  Count size = 0;  // electorate N of the station
};

/// Pairs each standardized score with the electorate of its station.
inline std::vector<SizedScore> sized_scores(std::span<const StationRecord> records, const ScoreSet& set) {
  std::vector<SizedScore> out;
  out.reserve(set.scores.size());
  for (const auto& s : set.scores) out.push_back({s.z_v, s.z_t, records[s.station].eligible});
  return out;
}

/// Euclidean length of the centroid shift, positive when the shift points
/// toward higher votes and turnout (dv + dt >= 0).
inline double signed_displacement(double dv, double dt) {
  const double len = std::hypot(dv, dt);
  return dv + dt < 0.0 ? -len : len;
}

struct DisplacementPoint {
  int p = 0;                    // size percentile threshold, percent
  std::optional<double> delta;  // undefined when either group is empty
  double dv = std::numeric_limits<double>::quiet_NaN();
  double dt = std::numeric_limits<double>::quiet_NaN();
  std::size_t small_count = 0;
  Count cutoff = 0;  // largest electorate counted as small
};

struct DisplacementCurve {
  std::string label;
  std::vector<DisplacementPoint> points;

  std::optional<double> at(int p) const {
    for (const auto& pt : points)
      if (pt.p == p) return pt.delta;
    return std::nullopt;
  }
};

inline std::vector<int> default_p_grid() {
  std::vector<int> g(90);
  std::iota(g.begin(), g.end(), 1);
  return g;
}

/// Grid 1..89 used to average displacements per province.
inline std::vector<int> ranking_p_grid() {
  std::vector<int> g(89);
  std::iota(g.begin(), g.end(), 1);
  return g;
}

/// Nearest-rank percentile of an ascending sample.
inline Count nearest_rank(std::span<const Count> sorted, double p) {
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

/// Displacement between the standardized centroids of small stations (N at or
/// below the p-th nearest-rank percentile) and the remaining large stations.
inline DisplacementCurve displacement_curve(std::span<const SizedScore> scores, std::span<const int> p_grid,
                                            std::string label = {}) {
  if (scores.empty()) throw InsufficientDataError("displacement_curve: no standardized scores");
  for (int p : p_grid)
    if (p <= 0 || p >= 100) throw InvalidArgument("displacement_curve: p must lie in (0, 100)");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a].size < scores[b].size; });
  std::vector<Count> sizes(order.size());
  std::vector<double> cum_v(order.size() + 1, 0.0), cum_t(order.size() + 1, 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    sizes[k] = scores[order[k]].size;
    cum_v[k + 1] = cum_v[k] + scores[order[k]].z_v;
    cum_t[k + 1] = cum_t[k] + scores[order[k]].z_t;
  }
  const auto n = order.size();

  DisplacementCurve curve{std::move(label), {}};
  for (int p : p_grid) {
    DisplacementPoint pt;
    pt.p = p;
    pt.cutoff = nearest_rank(sizes, p);
    const auto small = static_cast<std::size_t>(std::upper_bound(sizes.begin(), sizes.end(), pt.cutoff) - sizes.begin());
    pt.small_count = small;
    if (small > 0 && small < n) {
      const double ns = static_cast<double>(small), nl = static_cast<double>(n - small);
      pt.dv = cum_v[small] / ns - (cum_v[n] - cum_v[small]) / nl;
      pt.dt = cum_t[small] / ns - (cum_t[n] - cum_t[small]) / nl;
      pt.delta = signed_displacement(pt.dv, pt.dt);
    }
    curve.points.push_back(pt);
  }
  return curve;
}

/// Standardizes within districts, then computes the displacement curve.
inline DisplacementCurve displacement_curve(std::span<const StationRecord> records, std::span<const int> p_grid,
                                            const StandardizeOptions& opt = {}, std::string label = {}) {
  const auto set = standardize_scores(records, opt);
  return displacement_curve(sized_scores(records, set), p_grid, std::move(label));
}

struct AcceptanceRegion {
  std::vector<int> p;
  std::vector<std::optional<double>> lower;
  std::vector<std::optional<double>> upper;
  double confidence = 0.95;
  std::string provenance;
  std::size_t reference_count = 0;
};

/// Per-p two-sided empirical quantiles, (1 - c)/2 and (1 + c)/2, of the
/// reference displacements. The grid is taken from the first curve.
inline AcceptanceRegion acceptance_region(std::span<const DisplacementCurve> references, double confidence,
                                          std::string provenance = {}) {
  if (references.empty()) throw InsufficientDataError("acceptance_region: empty reference set");
  if (!(confidence > 0.0 && confidence <= 1.0)) throw InvalidArgument("acceptance_region: confidence outside (0, 1]");
  AcceptanceRegion region;
  region.confidence = confidence;
  region.provenance = std::move(provenance);
  region.reference_count = references.size();
  for (const auto& pt : references.front().points) {
    std::vector<double> vals;
    for (const auto& c : references)
      if (auto d = c.at(pt.p)) vals.push_back(*d);
    region.p.push_back(pt.p);
    if (vals.empty()) {
      region.lower.emplace_back();
      region.upper.emplace_back();
      continue;
    }
    std::sort(vals.begin(), vals.end());
    region.lower.emplace_back(stats::quantile_sorted(vals, (1.0 - confidence) / 2.0));
    region.upper.emplace_back(stats::quantile_sorted(vals, (1.0 + confidence) / 2.0));
  }
  return region;
}

struct RegionCheck {
  std::vector<int> above;  // p where delta > upper
  std::vector<int> below;  // p where delta < lower
  std::size_t compared = 0;
  std::size_t longest_run_above = 0;  // consecutive grid points above the region

  std::size_t exits() const { return above.size() + below.size(); }
  double exit_fraction() const { return compared ? static_cast<double>(exits()) / static_cast<double>(compared) : 0.0; }
};

inline RegionCheck check_region(const DisplacementCurve& curve, const AcceptanceRegion& region) {
  RegionCheck out;
  std::size_t run = 0;
  for (std::size_t k = 0; k < region.p.size(); ++k) {
    const auto d = curve.at(region.p[k]);
    if (!d || !region.lower[k] || !region.upper[k]) {
      run = 0;
      continue;
    }
    ++out.compared;
    if (*d > *region.upper[k]) {
      out.above.push_back(region.p[k]);
      out.longest_run_above = std::max(out.longest_run_above, ++run);
      continue;
    }
    run = 0;
    if (*d < *region.lower[k]) out.below.push_back(region.p[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Province ranking

struct ProvinceEntry {
  std::string province;
  double mean_delta = 0.0;
  double max_delta = 0.0;
  std::size_t scored_stations = 0;
  std::size_t defined_points = 0;
};

struct ProvinceRanking {
  std::vector<ProvinceEntry> entries;  // mean_delta descending
  std::vector<std::string> excluded;   // too few usable scores
};

struct RankingOptions {
  StandardizeOptions standardize{};
  std::size_t min_scores = 10;
  unsigned threads = 1;
};

/// Treats each province as its own election: standardizes within its
/// districts, computes delta(p) over `p_grid`, and ranks by the mean.
inline ProvinceRanking rank_provinces(std::span<const StationRecord> records, std::span<const int> p_grid,
                                      const RankingOptions& opt = {}) {
  if (records.empty()) throw InsufficientDataError("rank_provinces: no stations");
  const auto groups = group_indices(records, [](const StationRecord& r) { return r.region.province; });
  std::vector<std::optional<ProvinceEntry>> results(groups.size());
  parallel_for(groups.size(), opt.threads, [&](std::size_t g) {
    std::vector<StationRecord> subset;
    subset.reserve(groups[g].size());
    for (auto i : groups[g]) subset.push_back(records[i]);
    const auto set = standardize_scores(subset, opt.standardize);
    if (set.scores.size() < std::max<std::size_t>(opt.min_scores, 2)) return;
    const auto curve = displacement_curve(sized_scores(subset, set), p_grid);
    ProvinceEntry e{subset.front().region.province, 0.0, -std::numeric_limits<double>::infinity(), set.scores.size(), 0};
    for (const auto& pt : curve.points) {
      if (!pt.delta) continue;
      e.mean_delta += *pt.delta;
      e.max_delta = std::max(e.max_delta, *pt.delta);
      ++e.defined_points;
    }
    if (e.defined_points == 0) return;
    e.mean_delta /= static_cast<double>(e.defined_points);
    results[g] = e;
  });
  ProvinceRanking ranking;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (results[g])
      ranking.entries.push_back(*results[g]);
    else
      ranking.excluded.push_back(records[groups[g].front()].region.province);
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const auto& a, const auto& b) { return a.mean_delta > b.mean_delta; });
  return ranking;
}

// ---------------------------------------------------------------------------
// Reference-curve files: header "election_id;p;delta", one row per point.
// An empty delta field marks an undefined point.

inline std::vector<DisplacementCurve> read_reference_curves(std::istream& in, char delimiter = ';') {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header row");
  const auto header = detail::split(line, delimiter);
  if (header.size() != 3 || detail::trim(header[0]) != "election_id" || detail::trim(header[1]) != "p" ||
      detail::trim(header[2]) != "delta")
    throw ParseError(1, "expected header 'election_id;p;delta'");
  std::vector<DisplacementCurve> curves;
  std::map<std::string, std::size_t> slot;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, delimiter);
    if (f.size() != 3) throw ParseError(row, "expected 3 fields");
    const std::string id(detail::trim(f[0]));
    const auto p = detail::parse_count(f[1], row, "p");
    if (p <= 0 || p >= 100) throw ParseError(row, "p outside (0, 100)");
    DisplacementPoint pt;
    pt.p = static_cast<int>(p);
    const auto ds = detail::trim(f[2]);
    if (!ds.empty()) {
      try {
        std::size_t used = 0;
        const double d = std::stod(std::string(ds), &used);
        if (used != ds.size()) throw std::invalid_argument("trailing characters");
        if (std::isfinite(d)) pt.delta = d;
      } catch (const std::exception&) {
        throw ParseError(row, "delta is not a number: '" + std::string(ds) + "'");
      }
    }
    auto [it, inserted] = slot.try_emplace(id, curves.size());
    if (inserted) curves.push_back({id, {}});
    curves[it->second].points.push_back(pt);
  }
  for (auto& c : curves)
    std::sort(c.points.begin(), c.points.end(), [](const auto& a, const auto& b) { return a.p < b.p; });
  return curves;
}

inline void write_reference_curves(std::ostream& out, std::span<const DisplacementCurve> curves, char delimiter = ';') {
  out << "election_id" << delimiter << 'p' << delimiter << "delta\n";
  const auto old = out.precision(17);
  for (const auto& c : curves)
    for (const auto& pt : c.points) {
      out << c.label << delimiter << pt.p << delimiter;
      if (pt.delta) out << *pt.delta;
      out << '\n';
    }
  out.precision(old);
}

}  // namespace elfor
