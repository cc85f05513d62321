#pragma once

// SVG rendering of fingerprints, cumulative curves and displacement curves.
// Documents are plain SVG 1.1 with a viewBox; the plot area group carries
// data-* attributes giving the data ranges mapped onto its pixel rectangle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "elfor/error.hpp"
#include "elfor/fingerprint.hpp"
#include "elfor/rigging.hpp"

namespace elfor {

enum class PlotKind { heatmap, contour, line };

inline const char* to_string(PlotKind k) {
  switch (k) {
    case PlotKind::heatmap: return "heatmap";
    case PlotKind::contour: return "contour";
    case PlotKind::line: return "line";
  }
  return "?";
}

inline PlotKind parse_plot_kind(std::string_view s) {
  if (s == "heatmap") return PlotKind::heatmap;
  if (s == "contour") return PlotKind::contour;
  if (s == "line") return PlotKind::line;
  throw InvalidArgument("unknown plot kind '" + std::string(s) + "'");
}

struct FingerprintGroup {
  std::string label;
  Fingerprint fingerprint;
};

struct DisplacementPlot {
  std::vector<DisplacementCurve> curves;
  std::optional<AcceptanceRegion> region;
};

using PlotArtifact = std::variant<Fingerprint, std::vector<FingerprintGroup>, CumulativeCurve, DisplacementPlot>;

struct PlotOptions {
  double width = 640;
  double height = 560;
  std::string title;
  // contour levels as fractions of each group's smoothed maximum
  std::vector<double> contour_levels{0.1, 0.25, 0.4, 0.55, 0.7, 0.85};
};

// Maps data coordinates onto the plot rectangle. y grows upwards in data space.
struct PlotFrame {
  double left = 70, top = 40, right = 600, bottom = 500;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (right - left); }
  double py(double y) const { return bottom - (y - y0) / (y1 - y0) * (bottom - top); }
  double data_x(double px_) const { return x0 + (px_ - left) / (right - left) * (x1 - x0); }
  double data_y(double py_) const { return y0 + (bottom - py_) / (bottom - top) * (y1 - y0); }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// full precision, for data-* attributes
inline std::string fmt_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string rgb(double r, double g, double b) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(r * 255)),
                static_cast<int>(std::lround(g * 255)), static_cast<int>(std::lround(b * 255)));
  return buf;
}

// viridis-like ramp, s in [0,1]
inline std::string ramp(double s) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{{0.267, 0.005, 0.329},
                                                               {0.230, 0.322, 0.546},
                                                               {0.128, 0.567, 0.551},
                                                               {0.369, 0.789, 0.383},
                                                               {0.993, 0.906, 0.144}}};
  s = std::clamp(s, 0.0, 1.0) * (stops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(s), stops.size() - 2);
  const double w = s - static_cast<double>(i);
  const auto& a = stops[i];
  const auto& b = stops[i + 1];
  return rgb(a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1]), a[2] + w * (b[2] - a[2]));
}

inline const char* palette(std::size_t i) {
  static constexpr std::array<const char*, 6> p{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
  return p[i % p.size()];
}

inline void open_doc(std::ostringstream& o, const PlotOptions& opt, const PlotFrame& f) {
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fmt(opt.width) << "\" height=\""
    << fmt(opt.height) << "\" viewBox=\"0 0 " << fmt(opt.width) << ' ' << fmt(opt.height) << "\">\n"
    << "<desc>pixel origin top-left; plot-area data-* attributes map data ranges onto its rectangle</desc>\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << fmt(opt.width) << "\" height=\"" << fmt(opt.height)
    << "\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    o << "<text x=\"" << fmt((f.left + f.right) / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << xml_escape(opt.title) << "</text>\n";
  o << "<g class=\"plot-area\" data-x0=\"" << fmt_exact(f.x0) << "\" data-x1=\"" << fmt_exact(f.x1)
    << "\" data-y0=\"" << fmt_exact(f.y0) << "\" data-y1=\"" << fmt_exact(f.y1) << "\" data-left=\""
    << fmt(f.left) << "\" data-right=\"" << fmt(f.right) << "\" data-top=\"" << fmt(f.top) << "\" data-bottom=\""
    << fmt(f.bottom) << "\">\n";
}

inline double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10 * mag;
}

inline void axes(std::ostringstream& o, const PlotFrame& f, std::string_view xlabel, std::string_view ylabel) {
  o << "<g class=\"axis\" stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n"
    << "<line x1=\"" << fmt(f.left) << "\" y1=\"" << fmt(f.bottom) << "\" x2=\"" << fmt(f.right) << "\" y2=\""
    << fmt(f.bottom) << "\"/>\n"
    << "<line x1=\"" << fmt(f.left) << "\" y1=\"" << fmt(f.bottom) << "\" x2=\"" << fmt(f.left) << "\" y2=\""
    << fmt(f.top) << "\"/>\n";
  const double sx = nice_step(f.x1 - f.x0), sy = nice_step(f.y1 - f.y0);
  for (double t = std::ceil(f.x0 / sx - 1e-9) * sx; t <= f.x1 + 1e-9 * sx; t += sx)
    o << "<line x1=\"" << fmt(f.px(t)) << "\" y1=\"" << fmt(f.bottom) << "\" x2=\"" << fmt(f.px(t)) << "\" y2=\""
      << fmt(f.bottom + 5) << "\"/>\n";
  for (double t = std::ceil(f.y0 / sy - 1e-9) * sy; t <= f.y1 + 1e-9 * sy; t += sy)
    o << "<line x1=\"" << fmt(f.left - 5) << "\" y1=\"" << fmt(f.py(t)) << "\" x2=\"" << fmt(f.left) << "\" y2=\""
      << fmt(f.py(t)) << "\"/>\n";
  o << "</g>\n<g class=\"axis-labels\" font-size=\"11\" fill=\"black\">\n";
  for (double t = std::ceil(f.x0 / sx - 1e-9) * sx; t <= f.x1 + 1e-9 * sx; t += sx)
    o << "<text x=\"" << fmt(f.px(t)) << "\" y=\"" << fmt(f.bottom + 18) << "\" text-anchor=\"middle\">"
      << fmt_exact(std::round(t * 1e6) / 1e6) << "</text>\n";
  for (double t = std::ceil(f.y0 / sy - 1e-9) * sy; t <= f.y1 + 1e-9 * sy; t += sy)
    o << "<text x=\"" << fmt(f.left - 8) << "\" y=\"" << fmt(f.py(t) + 4) << "\" text-anchor=\"end\">"
      << fmt_exact(std::round(t * 1e6) / 1e6) << "</text>\n";
  o << "<text x=\"" << fmt((f.left + f.right) / 2) << "\" y=\"" << fmt(f.bottom + 40)
    << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(xlabel) << "</text>\n"
    << "<text transform=\"translate(18," << fmt((f.top + f.bottom) / 2)
    << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(ylabel) << "</text>\n"
    << "</g>\n";
}

inline PlotFrame frame_for(const PlotOptions& opt) {
  PlotFrame f;
  f.right = opt.width - 40;
  f.bottom = opt.height - 60;
  return f;
}

inline std::pair<std::string, std::string> fingerprint_labels(AxisKind k) {
  if (k == AxisKind::raw) return {"vote share v", "turnout t"};
  return {"standardized vote share", "standardized turnout"};
}

inline void check_fingerprint(const Fingerprint& fp) {
  if (fp.cells.empty() || fp.total() == 0) throw InsufficientDataError("plot: empty fingerprint");
  if (fp.cells.size() != fp.geometry.x.bins * fp.geometry.y.bins)
    throw InvalidArgument("plot: fingerprint cells do not match its geometry");
}

// 3x3 box filter, edges averaged over the cells that exist
inline std::vector<double> box_smooth(const Fingerprint& fp) {
  const std::size_t nx = fp.geometry.x.bins, ny = fp.geometry.y.bins;
  std::vector<double> out(nx * ny, 0.0);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      double s = 0;
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const long xx = static_cast<long>(x) + dx, yy = static_cast<long>(y) + dy;
          if (xx < 0 || yy < 0 || xx >= static_cast<long>(nx) || yy >= static_cast<long>(ny)) continue;
          s += static_cast<double>(fp.cells[yy * nx + xx]);
          ++n;
        }
      out[y * nx + x] = s / n;
    }
  return out;
}

struct Segment {
  Point2 a, b;
};

// Marching squares over a grid sampled at cell centres. Returns segments in
// grid index coordinates (x = column, y = row).
inline std::vector<Segment> marching_squares(const std::vector<double>& g, std::size_t nx, std::size_t ny,
                                             double level) {
  std::vector<Segment> segs;
  if (nx < 2 || ny < 2) return segs;
  auto at = [&](std::size_t x, std::size_t y) { return g[y * nx + x]; };
  auto lerp = [&](double x0, double y0, double v0, double x1, double y1, double v1) {
    const double t = (level - v0) / (v1 - v0);
    return Point2{x0 + t * (x1 - x0), y0 + t * (y1 - y0)};
  };
  for (std::size_t y = 0; y + 1 < ny; ++y)
    for (std::size_t x = 0; x + 1 < nx; ++x) {
      const double v0 = at(x, y), v1 = at(x + 1, y), v2 = at(x + 1, y + 1), v3 = at(x, y + 1);
      const int c = (v0 >= level) | (v1 >= level) << 1 | (v2 >= level) << 2 | (v3 >= level) << 3;
      if (c == 0 || c == 15) continue;
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      // edges: 0 bottom (v0-v1), 1 right (v1-v2), 2 top (v3-v2), 3 left (v0-v3)
      auto edge = [&](int e) {
        switch (e) {
          case 0: return lerp(fx, fy, v0, fx + 1, fy, v1);
          case 1: return lerp(fx + 1, fy, v1, fx + 1, fy + 1, v2);
          case 2: return lerp(fx, fy + 1, v3, fx + 1, fy + 1, v2);
          default: return lerp(fx, fy, v0, fx, fy + 1, v3);
        }
      };
      auto add = [&](int e1, int e2) { segs.push_back({edge(e1), edge(e2)}); };
      const bool centre_high = (v0 + v1 + v2 + v3) / 4.0 >= level;
      switch (c) {
        case 1: case 14: add(3, 0); break;
        case 2: case 13: add(0, 1); break;
        case 3: case 12: add(3, 1); break;
        case 4: case 11: add(1, 2); break;
        case 6: case 9: add(0, 2); break;
        case 7: case 8: add(3, 2); break;
        case 5:
          if (centre_high) { add(3, 2); add(0, 1); } else { add(3, 0); add(1, 2); }
          break;
        case 10:
          if (centre_high) { add(3, 0); add(1, 2); } else { add(3, 2); add(0, 1); }
          break;
        default: break;
      }
    }
  return segs;
}

inline std::string heatmap(const Fingerprint& fp, const PlotOptions& opt) {
  check_fingerprint(fp);
  PlotFrame f = frame_for(opt);
  f.x0 = fp.geometry.x.lo;
  f.x1 = fp.geometry.x.hi;
  f.y0 = fp.geometry.y.lo;
  f.y1 = fp.geometry.y.hi;
  std::ostringstream o;
  open_doc(o, opt, f);
  const auto max = *std::max_element(fp.cells.begin(), fp.cells.end());
  const double lmax = std::log1p(static_cast<double>(max));
  const std::size_t nx = fp.geometry.x.bins, ny = fp.geometry.y.bins;
  const double wx = (fp.geometry.x.hi - fp.geometry.x.lo) / nx, wy = (fp.geometry.y.hi - fp.geometry.y.lo) / ny;
  o << "<g class=\"cells\" stroke=\"none\">\n";
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      const auto n = fp.cells[y * nx + x];
      if (n == 0) continue;
      const double x0 = f.px(f.x0 + x * wx), x1 = f.px(f.x0 + (x + 1) * wx);
      const double y0 = f.py(f.y0 + (y + 1) * wy), y1 = f.py(f.y0 + y * wy);
      o << "<rect class=\"cell\" x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(x1 - x0)
        << "\" height=\"" << fmt(y1 - y0) << "\" fill=\"" << ramp(lmax > 0 ? std::log1p(n) / lmax : 1.0)
        << "\" data-count=\"" << n << "\"/>\n";
    }
  o << "</g>\n";
  const auto [xl, yl] = fingerprint_labels(fp.kind);
  axes(o, f, xl, yl);
  o << "</g>\n</svg>\n";
  return o.str();
}

inline std::string contour(const std::vector<FingerprintGroup>& groups, const PlotOptions& opt) {
  if (groups.empty()) throw InsufficientDataError("plot: no fingerprints to contour");
  for (const auto& g : groups) {
    check_fingerprint(g.fingerprint);
    if (!(g.fingerprint.geometry == groups.front().fingerprint.geometry))
      throw InvalidArgument("plot: contour groups must share one geometry");
  }
  const auto& geo = groups.front().fingerprint.geometry;
  PlotFrame f = frame_for(opt);
  f.x0 = geo.x.lo;
  f.x1 = geo.x.hi;
  f.y0 = geo.y.lo;
  f.y1 = geo.y.hi;
  std::ostringstream o;
  open_doc(o, opt, f);
  const std::size_t nx = geo.x.bins, ny = geo.y.bins;
  const double wx = (geo.x.hi - geo.x.lo) / nx, wy = (geo.y.hi - geo.y.lo) / ny;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto smooth = box_smooth(groups[gi].fingerprint);
    const double top = *std::max_element(smooth.begin(), smooth.end());
    o << "<g class=\"contour-group\" data-label=\"" << xml_escape(groups[gi].label) << "\" stroke=\""
      << palette(gi) << "\" fill=\"none\" stroke-width=\"1.2\">\n";
    for (double lv : opt.contour_levels) {
      const auto segs = marching_squares(smooth, nx, ny, lv * top);
      if (segs.empty()) continue;
      o << "<path class=\"contour\" data-level=\"" << fmt_exact(lv) << "\" d=\"";
      for (const auto& s : segs) {
        // cell centres sit half a bin in from the edges
        o << 'M' << fmt(f.px(f.x0 + (s.a.x + 0.5) * wx)) << ' ' << fmt(f.py(f.y0 + (s.a.y + 0.5) * wy)) << 'L'
          << fmt(f.px(f.x0 + (s.b.x + 0.5) * wx)) << ' ' << fmt(f.py(f.y0 + (s.b.y + 0.5) * wy));
      }
      o << "\"/>\n";
    }
    o << "</g>\n";
  }
  o << "<g class=\"legend\" font-size=\"12\">\n";
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double y = f.top + 14 + 16.0 * gi;
    o << "<line x1=\"" << fmt(f.right - 120) << "\" y1=\"" << fmt(y - 4) << "\" x2=\"" << fmt(f.right - 100)
      << "\" y2=\"" << fmt(y - 4) << "\" stroke=\"" << palette(gi) << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << fmt(f.right - 95) << "\" y=\"" << fmt(y) << "\">" << xml_escape(groups[gi].label)
      << "</text>\n";
  }
  o << "</g>\n";
  const auto [xl, yl] = fingerprint_labels(groups.front().fingerprint.kind);
  axes(o, f, xl, yl);
  o << "</g>\n</svg>\n";
  return o.str();
}

inline void polyline_runs(std::ostringstream& o, const PlotFrame& f, const std::vector<std::optional<Point2>>& pts,
                          std::string_view cls, std::string_view colour) {
  std::string run;
  auto flush = [&] {
    if (!run.empty())
      o << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\""
        << run << "\"/>\n";
    run.clear();
  };
  for (const auto& p : pts) {
    if (!p) {
      flush();
      continue;
    }
    if (!run.empty()) run += ' ';
    run += fmt(f.px(p->x)) + ',' + fmt(f.py(p->y));
  }
  flush();
}

inline std::string cumulative_line(const CumulativeCurve& c, const PlotOptions& opt) {
  if (c.points.empty()) throw InsufficientDataError("plot: empty cumulative curve");
  PlotFrame f = frame_for(opt);
  f.x0 = c.points.front().x;
  f.x1 = c.points.front().x;
  for (const auto& p : c.points) {
    f.x0 = std::min(f.x0, p.x);
    f.x1 = std::max(f.x1, p.x);
  }
  if (!(f.x1 > f.x0)) f.x1 = f.x0 + 1;
  f.y0 = 0;
  f.y1 = 1;
  std::ostringstream o;
  open_doc(o, opt, f);
  o << "<line class=\"gridline\" data-y=\"0.5\" x1=\"" << fmt(f.left) << "\" y1=\"" << fmt(f.py(0.5)) << "\" x2=\""
    << fmt(f.right) << "\" y2=\"" << fmt(f.py(0.5)) << "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
  std::vector<std::optional<Point2>> pts;
  for (const auto& p : c.points) pts.push_back(Point2{p.x, p.cumulative});
  polyline_runs(o, f, pts, "curve", palette(0));
  axes(o, f, c.mode == CurveMode::by_turnout_level ? "turnout t" : "station rank by electorate",
       "cumulative vote share");
  o << "</g>\n</svg>\n";
  return o.str();
}

inline std::string displacement_line(const DisplacementPlot& d, const PlotOptions& opt) {
  bool any = false;
  for (const auto& c : d.curves)
    for (const auto& p : c.points) any |= p.delta.has_value();
  if (d.region)
    for (std::size_t k = 0; k < d.region->p.size(); ++k) any |= d.region->upper[k].has_value();
  if (!any) throw InsufficientDataError("plot: displacement artifact has no defined values");

  PlotFrame f = frame_for(opt);
  double lo = 0, hi = 0;
  int pmin = 1000000, pmax = -1000000;
  auto see = [&](int p, const std::optional<double>& v) {
    pmin = std::min(pmin, p);
    pmax = std::max(pmax, p);
    if (v) {
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
  };
  for (const auto& c : d.curves)
    for (const auto& p : c.points) see(p.p, p.delta);
  if (d.region)
    for (std::size_t k = 0; k < d.region->p.size(); ++k) {
      see(d.region->p[k], d.region->lower[k]);
      see(d.region->p[k], d.region->upper[k]);
    }
  const double pad = 0.05 * std::max(hi - lo, 1e-3);
  f.x0 = pmin;
  f.x1 = pmax > pmin ? pmax : pmin + 1;
  f.y0 = lo - pad;
  f.y1 = hi + pad;
  std::ostringstream o;
  open_doc(o, opt, f);
  if (d.region) {
    const auto& r = *d.region;
    // one polygon per contiguous run where both bounds exist
    std::size_t k = 0;
    while (k < r.p.size()) {
      if (!r.lower[k] || !r.upper[k]) {
        ++k;
        continue;
      }
      std::size_t e = k;
      while (e < r.p.size() && r.lower[e] && r.upper[e]) ++e;
      o << "<polygon class=\"band\" data-first=\"" << r.p[k] << "\" data-last=\"" << r.p[e - 1]
        << "\" fill=\"#c6dbef\" fill-opacity=\"0.7\" stroke=\"none\" points=\"";
      for (std::size_t i = k; i < e; ++i) o << fmt(f.px(r.p[i])) << ',' << fmt(f.py(*r.upper[i])) << ' ';
      for (std::size_t i = e; i-- > k;)
        o << fmt(f.px(r.p[i])) << ',' << fmt(f.py(*r.lower[i])) << (i > k ? " " : "");
      o << "\"/>\n";
      k = e;
    }
  }
  o << "<line class=\"gridline\" data-y=\"0\" x1=\"" << fmt(f.left) << "\" y1=\"" << fmt(f.py(0)) << "\" x2=\""
    << fmt(f.right) << "\" y2=\"" << fmt(f.py(0)) << "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t ci = 0; ci < d.curves.size(); ++ci) {
    std::vector<std::optional<Point2>> pts;
    for (const auto& p : d.curves[ci].points)
      pts.push_back(p.delta ? std::optional<Point2>(Point2{static_cast<double>(p.p), *p.delta}) : std::nullopt);
    o << "<g class=\"curve-group\" data-label=\"" << xml_escape(d.curves[ci].label) << "\">\n";
    polyline_runs(o, f, pts, "curve", palette(ci));
    o << "</g>\n";
  }
  axes(o, f, "size percentile p", "displacement delta(p)");
  o << "</g>\n</svg>\n";
  return o.str();
}

}  // namespace detail

inline std::string emit_plot(const PlotArtifact& artifact, PlotKind kind, const PlotOptions& opt = {}) {
  return std::visit(
      [&](const auto& a) -> std::string {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, Fingerprint>) {
          if (kind == PlotKind::heatmap) return detail::heatmap(a, opt);
          if (kind == PlotKind::contour) return detail::contour({FingerprintGroup{"all", a}}, opt);
          throw InvalidArgument("plot: a fingerprint renders as heatmap or contour, not line");
        } else if constexpr (std::is_same_v<A, std::vector<FingerprintGroup>>) {
          if (kind == PlotKind::contour) return detail::contour(a, opt);
          throw InvalidArgument("plot: grouped fingerprints render only as contour");
        } else if constexpr (std::is_same_v<A, CumulativeCurve>) {
          if (kind == PlotKind::line) return detail::cumulative_line(a, opt);
          throw InvalidArgument("plot: a cumulative curve renders only as line");
        } else {
          if (kind == PlotKind::line) return detail::displacement_line(a, opt);
          throw InvalidArgument("plot: a displacement curve renders only as line");
        }
      },
      artifact);
}

}  // namespace elfor
