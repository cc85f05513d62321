#include <gtest/gtest.h>

#include <regex>

#include "helpers.hpp"

using namespace elfor;
using testing_support::count_substr;
using testing_support::well_formed_xml;

namespace {

double attr(const std::string& tag, const std::string& name) {
  const std::regex re(" " + name + "=\"([^\"]*)\"");
  std::smatch m;
  if (!std::regex_search(tag, m, re)) throw std::runtime_error("missing attribute " + name);
  return std::stod(m[1]);
}

std::vector<std::string> tags(const std::string& doc, const std::string& open) {
  std::vector<std::string> out;
  for (auto pos = doc.find(open); pos != std::string::npos; pos = doc.find(open, pos + 1))
    out.push_back(doc.substr(pos, doc.find('>', pos) - pos + 1));
  return out;
}

PlotFrame frame_of(const std::string& doc) {
  const auto g = tags(doc, "<g class=\"plot-area\"").at(0);
  PlotFrame f;
  f.x0 = attr(g, "data-x0");
  f.x1 = attr(g, "data-x1");
  f.y0 = attr(g, "data-y0");
  f.y1 = attr(g, "data-y1");
  f.left = attr(g, "data-left");
  f.right = attr(g, "data-right");
  f.top = attr(g, "data-top");
  f.bottom = attr(g, "data-bottom");
  return f;
}

void expect_well_formed(const std::string& doc) {
  std::string why;
  EXPECT_TRUE(well_formed_xml(doc, &why)) << why;
}

Fingerprint diagonal() {
  Fingerprint fp;
  fp.geometry = {{2, 0.0, 1.0}, {2, 0.0, 1.0}};
  fp.cells = {1, 0, 0, 1};
  return fp;
}

}  // namespace

TEST(Plot, KindNames) {
  for (auto k : {PlotKind::heatmap, PlotKind::contour, PlotKind::line}) EXPECT_EQ(parse_plot_kind(to_string(k)), k);
  EXPECT_THROW(parse_plot_kind("pie"), InvalidArgument);
}

TEST(Plot, DiagonalHeatmapHasTwoCells) {
  const auto doc = emit_plot(diagonal(), PlotKind::heatmap);
  expect_well_formed(doc);
  const auto cells = tags(doc, "<rect class=\"cell\"");
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(count_substr(doc, "<g class=\"axis\""), 1u);
  const auto f = frame_of(doc);
  // each cell covers one quarter of the unit square, on the diagonal
  std::vector<std::pair<double, double>> lower_left;
  for (const auto& c : cells) {
    const double x = attr(c, "x"), y = attr(c, "y"), w = attr(c, "width"), h = attr(c, "height");
    EXPECT_NEAR(f.data_x(x + w) - f.data_x(x), 0.5, 1e-5);
    EXPECT_NEAR(f.data_y(y) - f.data_y(y + h), 0.5, 1e-5);
    lower_left.emplace_back(f.data_x(x), f.data_y(y + h));
    EXPECT_EQ(attr(c, "data-count"), 1.0);
  }
  EXPECT_NEAR(lower_left[0].first, 0.0, 1e-5);
  EXPECT_NEAR(lower_left[0].second, 0.0, 1e-5);
  EXPECT_NEAR(lower_left[1].first, 0.5, 1e-5);
  EXPECT_NEAR(lower_left[1].second, 0.5, 1e-5);
}

TEST(Plot, ContourOfRealFingerprints) {
  SyntheticSpec s;
  s.provinces = 2;
  const auto clean = generate_synthetic(s);
  s.stuffing = {0.2, 0.05, 1.3};
  const auto stuffed = generate_synthetic(s);
  const std::vector groups{FingerprintGroup{"clean", compute_fingerprint(std::span<const StationRecord>(clean.records))},
                           FingerprintGroup{"a<b & \"c\"", compute_fingerprint(std::span<const StationRecord>(stuffed.records))}};
  const auto doc = emit_plot(groups, PlotKind::contour, {640, 560, "two & more", {0.2, 0.5}});
  expect_well_formed(doc);
  EXPECT_EQ(count_substr(doc, "<g class=\"contour-group\""), 2u);
  EXPECT_GE(count_substr(doc, "<path class=\"contour\""), 4u);
  EXPECT_NE(doc.find("a&lt;b &amp; &quot;c&quot;"), std::string::npos);
  // contour vertices stay inside the plot rectangle
  const auto f = frame_of(doc);
  for (const auto& p : tags(doc, "<path class=\"contour\"")) {
    const std::regex num(R"((-?[0-9]+\.[0-9]+),(-?[0-9]+\.[0-9]+))");
    const auto d = p.substr(p.find(" d=\""));
    for (std::sregex_iterator it(d.begin(), d.end(), num), end; it != end; ++it) {
      const double x = std::stod((*it)[1]), y = std::stod((*it)[2]);
      EXPECT_GE(x, f.left - 1e-3);
      EXPECT_LE(x, f.right + 1e-3);
      EXPECT_GE(y, f.top - 1e-3);
      EXPECT_LE(y, f.bottom + 1e-3);
    }
  }
}

TEST(Plot, CumulativeLine) {
  SyntheticSpec s;
  s.provinces = 1;
  const auto e = generate_synthetic(s);
  const auto c = cumulative_curve(e.records, CurveMode::by_turnout_level);
  const auto doc = emit_plot(c, PlotKind::line);
  expect_well_formed(doc);
  EXPECT_EQ(count_substr(doc, "class=\"gridline\" data-y=\"0.5\""), 1u);
  EXPECT_GE(count_substr(doc, "<polyline class=\"curve\""), 1u);
}

TEST(Plot, BandMapsBackToRegionBounds) {
  AcceptanceRegion r;
  r.p = {1, 2, 3, 4, 5, 6};
  r.lower = {-0.2, -0.25, std::nullopt, -0.3, -0.31, -0.4};
  r.upper = {0.2, 0.22, std::nullopt, 0.3, 0.35, 0.41};
  DisplacementCurve c{"observed", {}};
  for (int p = 1; p <= 6; ++p) {
    DisplacementPoint pt;
    pt.p = p;
    if (p != 2) pt.delta = 0.1 * p - 0.3;
    c.points.push_back(pt);
  }
  const auto doc = emit_plot(DisplacementPlot{{c}, r}, PlotKind::line, {800, 600, "", {}});
  expect_well_formed(doc);
  const auto f = frame_of(doc);
  const auto bands = tags(doc, "<polygon class=\"band\"");
  ASSERT_EQ(bands.size(), 2u);
  const double tol_x = 1e-3 * (f.x1 - f.x0), tol_y = 1e-3 * (f.y1 - f.y0);
  for (const auto& band : bands) {
    const int first = static_cast<int>(attr(band, "data-first")), last = static_cast<int>(attr(band, "data-last"));
    const auto pts_start = band.find("points=\"") + 8;
    const std::string pts = band.substr(pts_start, band.find('"', pts_start) - pts_start);
    std::vector<std::pair<double, double>> xy;
    const std::regex num(R"((-?[0-9.]+),(-?[0-9.]+))");
    for (std::sregex_iterator it(pts.begin(), pts.end(), num), end; it != end; ++it)
      xy.emplace_back(f.data_x(std::stod((*it)[1])), f.data_y(std::stod((*it)[2])));
    const std::size_t n = static_cast<std::size_t>(last - first + 1);
    ASSERT_EQ(xy.size(), 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = static_cast<std::size_t>(first - 1) + i;
      EXPECT_NEAR(xy[i].first, r.p[k], tol_x);
      EXPECT_NEAR(xy[i].second, *r.upper[k], tol_y);
      EXPECT_NEAR(xy[2 * n - 1 - i].first, r.p[k], tol_x);
      EXPECT_NEAR(xy[2 * n - 1 - i].second, *r.lower[k], tol_y);
    }
  }
  // the curve breaks where delta is undefined
  EXPECT_EQ(count_substr(doc, "<polyline class=\"curve\""), 2u);
}

TEST(Plot, IncompatibleKindsAndEmptyInput) {
  EXPECT_THROW(emit_plot(diagonal(), PlotKind::line), InvalidArgument);
  EXPECT_THROW(emit_plot(CumulativeCurve{}, PlotKind::heatmap), InvalidArgument);
  EXPECT_THROW(emit_plot(DisplacementPlot{}, PlotKind::contour), InvalidArgument);
  EXPECT_THROW(emit_plot(std::vector<FingerprintGroup>{}, PlotKind::heatmap), InvalidArgument);
  EXPECT_THROW(emit_plot(CumulativeCurve{}, PlotKind::line), InsufficientDataError);
  EXPECT_THROW(emit_plot(DisplacementPlot{}, PlotKind::line), InsufficientDataError);
  Fingerprint empty = diagonal();
  empty.cells = {0, 0, 0, 0};
  EXPECT_THROW(emit_plot(empty, PlotKind::heatmap), InsufficientDataError);
  EXPECT_THROW(emit_plot(std::vector<FingerprintGroup>{}, PlotKind::contour), InsufficientDataError);
}

TEST(Plot, Deterministic) {
  EXPECT_EQ(emit_plot(diagonal(), PlotKind::contour), emit_plot(diagonal(), PlotKind::contour));
}
