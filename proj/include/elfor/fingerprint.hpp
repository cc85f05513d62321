#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "elfor/error.hpp"
#include "elfor/ingest.hpp"
#include "elfor/parallel.hpp"

namespace elfor {

struct Axis {
  std::size_t bins = 100;
  double lo = 0.0;
  double hi = 1.0;

  bool operator==(const Axis&) const = default;
};

enum class AxisKind { raw, standardized };

struct Geometry {
  Axis x;  // vote share or Z_v
  Axis y;  // relative turnout or Z_t

  static Geometry raw_default() { return {{100, 0.0, 1.0}, {100, 0.0, 1.0}}; }
  static Geometry standardized_default() { return {{60, -6.0, 6.0}, {60, -6.0, 6.0}}; }
  bool operator==(const Geometry&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Joint histogram of stations. Cells are row-major with y as the row:
/// cell(ix, iy) = cells[iy * x.bins + ix].
struct Fingerprint {
  Geometry geometry;
  AxisKind kind = AxisKind::raw;
  std::vector<std::uint64_t> cells;
  std::uint64_t out_of_range = 0;  // includes points with undefined coordinates

  std::uint64_t cell(std::size_t ix, std::size_t iy) const { return cells[iy * geometry.x.bins + ix]; }
  std::uint64_t total() const { return std::accumulate(cells.begin(), cells.end(), std::uint64_t{0}); }
  bool operator==(const Fingerprint&) const = default;
};

namespace detail {

inline void check_axis(const Axis& a, const char* name) {
  if (a.bins == 0) throw InvalidArgument(std::string("fingerprint: axis ") + name + " needs at least one bin");
  if (!(a.hi > a.lo)) throw InvalidArgument(std::string("fingerprint: degenerate range on axis ") + name);
}

/// Bin index for x in [lo, hi]; the upper edge belongs to the last bin. -1 when outside.
inline long bin_of(const Axis& a, double x) {
  if (!(x >= a.lo && x <= a.hi)) return -1;
  const auto i = static_cast<long>(std::floor((x - a.lo) / (a.hi - a.lo) * static_cast<double>(a.bins)));
  return std::min(i, static_cast<long>(a.bins) - 1);
}

}  // namespace detail

/// Histograms arbitrary points. Accumulation is split across `threads`
/// workers and merged; the result does not depend on the split.
inline Fingerprint compute_fingerprint(std::span<const Point2> points, const Geometry& geometry,
                                       AxisKind kind = AxisKind::raw, unsigned threads = 1) {
  if (points.empty()) throw InsufficientDataError("fingerprint: no stations");
  detail::check_axis(geometry.x, "x");
  detail::check_axis(geometry.y, "y");
  const std::size_t ncell = geometry.x.bins * geometry.y.bins;
  const std::size_t workers = std::min<std::size_t>(resolve_threads(threads), points.size());
  std::vector<std::vector<std::uint64_t>> partial(workers, std::vector<std::uint64_t>(ncell, 0));
  std::vector<std::uint64_t> outside(workers, 0);
  parallel_chunks(points.size(), static_cast<unsigned>(workers), [&](std::size_t b, std::size_t e, std::size_t w) {
    auto& cells = partial[w];
    for (std::size_t i = b; i < e; ++i) {
      const long ix = detail::bin_of(geometry.x, points[i].x);
      const long iy = detail::bin_of(geometry.y, points[i].y);
      if (ix < 0 || iy < 0) {
        ++outside[w];
        continue;
      }
      ++cells[static_cast<std::size_t>(iy) * geometry.x.bins + static_cast<std::size_t>(ix)];
    }
  });
  Fingerprint fp{geometry, kind, std::vector<std::uint64_t>(ncell, 0), 0};
  for (std::size_t w = 0; w < workers; ++w) {
    for (std::size_t c = 0; c < ncell; ++c) fp.cells[c] += partial[w][c];
    fp.out_of_range += outside[w];
  }
  return fp;
}

/// Raw election fingerprint over (vote share, relative turnout).
inline Fingerprint compute_fingerprint(std::span<const StationRecord> records,
                                       const Geometry& geometry = Geometry::raw_default(),
                                       unsigned threads = 1) {
  std::vector<Point2> pts;
  pts.reserve(records.size());
  for (const auto& r : records) pts.push_back({r.vote_share, r.rel_turnout});
  return compute_fingerprint(pts, geometry, AxisKind::raw, threads);
}

// ---------------------------------------------------------------------------
// Standardized scores

enum class SpreadConvention { sample, population };

struct StandardizedScore {
  std::size_t station = 0;  // index into the record list that was standardized
  double z_v = 0.0;
  double z_t = 0.0;
  std::size_t neighborhood_size = 0;  // other stations in the district
};

struct ScoreSet {
  std::vector<StandardizedScore> scores;  // in record order
  std::size_t skipped = 0;                // stations without a defined score
};

struct StandardizeOptions {
  SpreadConvention spread = SpreadConvention::sample;
  std::size_t min_neighbors = 2;
};

namespace detail {

/// Leave-one-out Z scores of `xs`: (x_i - mean of others) / spread of others.
/// NaN where the neighborhood spread is zero. Computed on values centered at the
/// group mean so common affine rescalings cancel to rounding.
inline std::vector<double> leave_one_out_z(std::span<const double> xs, SpreadConvention spread) {
  const std::size_t n = xs.size();
  std::vector<double> z(n, std::numeric_limits<double>::quiet_NaN());
  if (n < 2) return z;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double s1 = 0.0, s2 = 0.0;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = xs[i] - mean;
    s1 += d[i];
    s2 += d[i] * d[i];
  }
  const double m = static_cast<double>(n - 1);
  const double denom = spread == SpreadConvention::sample ? m - 1.0 : m;
  if (denom <= 0.0) return z;
  for (std::size_t i = 0; i < n; ++i) {
    const double nb_mean = (s1 - d[i]) / m;
    const double ss = std::max(s2 - d[i] * d[i] - m * nb_mean * nb_mean, 0.0);
    const double sd = std::sqrt(ss / denom);
    // Spread below rounding noise of the centered sums counts as zero.
    if (sd > 1e-12 * std::sqrt(s2 / static_cast<double>(n)) && sd > 0.0) z[i] = (d[i] - nb_mean) / sd;
  }
  return z;
}

}  // namespace detail

/// Standardizes each station against the other stations of its district.
/// Stations with undefined rates, fewer than `min_neighbors` usable neighbors,
/// or a zero-spread neighborhood are skipped and tallied.
inline ScoreSet standardize_scores(std::span<const StationRecord> records, const StandardizeOptions& opt = {}) {
  ScoreSet out;
  std::vector<char> has_score(records.size(), 0);
  std::vector<StandardizedScore> by_record(records.size());
  for (const auto& group : group_indices(records, district_key)) {
    std::vector<std::size_t> usable;
    for (auto i : group)
      if (records[i].has_vote_share() && records[i].has_turnout()) usable.push_back(i);
    if (usable.size() < opt.min_neighbors + 1) continue;
    std::vector<double> v, t;
    for (auto i : usable) {
      v.push_back(records[i].vote_share);
      t.push_back(records[i].rel_turnout);
    }
    const auto zv = detail::leave_one_out_z(v, opt.spread);
    const auto zt = detail::leave_one_out_z(t, opt.spread);
    for (std::size_t k = 0; k < usable.size(); ++k) {
      if (std::isnan(zv[k]) || std::isnan(zt[k])) continue;
      has_score[usable[k]] = 1;
      by_record[usable[k]] = {usable[k], zv[k], zt[k], usable.size() - 1};
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (has_score[i])
      out.scores.push_back(by_record[i]);
    else
      ++out.skipped;
  }
  return out;
}

/// Standardized fingerprint over (Z_v, Z_t).
inline Fingerprint compute_fingerprint(std::span<const StandardizedScore> scores,
                                       const Geometry& geometry = Geometry::standardized_default(),
                                       unsigned threads = 1) {
  std::vector<Point2> pts;
  pts.reserve(scores.size());
  for (const auto& s : scores) pts.push_back({s.z_v, s.z_t});
  return compute_fingerprint(pts, geometry, AxisKind::standardized, threads);
}

// ---------------------------------------------------------------------------
// Cumulative vote-percentage curves

enum class CurveMode { by_turnout_level, by_size_rank };

struct CurvePoint {
  double x = 0.0;  // turnout level, or 1-based size rank
  double cumulative = 0.0;
};

struct CumulativeCurve {
  CurveMode mode = CurveMode::by_turnout_level;
  std::vector<CurvePoint> points;

  double final_value() const { return points.empty() ? std::numeric_limits<double>::quiet_NaN() : points.back().cumulative; }
  bool operator==(const CumulativeCurve&) const = default;
};

inline bool operator==(const CurvePoint& a, const CurvePoint& b) { return a.x == b.x && a.cumulative == b.cumulative; }

/// Cumulative sum V / sum T. by_turnout_level: one point per distinct turnout
/// level, including every station at or below it. by_size_rank: stations by N
/// descending (ties by region key), one point per station.
/// Stations with T = 0 carry no votes and are left out.
inline CumulativeCurve cumulative_curve(std::span<const StationRecord> records, CurveMode mode) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].has_vote_share()) idx.push_back(i);
  if (idx.empty()) throw InsufficientDataError("cumulative_curve: no stations with votes");

  CumulativeCurve curve{mode, {}};
  Count sv = 0, st = 0;
  if (mode == CurveMode::by_turnout_level) {
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      return records[a].rel_turnout < records[b].rel_turnout;
    });
    for (std::size_t k = 0; k < idx.size(); ++k) {
      sv += records[idx[k]].yes;
      st += records[idx[k]].turnout;
      const bool last_of_level = k + 1 == idx.size() || records[idx[k + 1]].rel_turnout != records[idx[k]].rel_turnout;
      if (last_of_level)
        curve.points.push_back({records[idx[k]].rel_turnout, static_cast<double>(sv) / static_cast<double>(st)});
    }
  } else {
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      if (records[a].eligible != records[b].eligible) return records[a].eligible > records[b].eligible;
      return records[a].region < records[b].region;
    });
    curve.points.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      sv += records[idx[k]].yes;
      st += records[idx[k]].turnout;
      curve.points.push_back({static_cast<double>(k + 1), static_cast<double>(sv) / static_cast<double>(st)});
    }
  }
  return curve;
}

}  // namespace elfor
