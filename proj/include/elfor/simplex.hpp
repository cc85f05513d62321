#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "elfor/error.hpp"

namespace elfor {

struct SimplexOptions {
  int max_iterations = 300;
  double xtol = 1e-3;   // simplex extent, in units of the initial step per coordinate
  double ftol = 1e-10;  // spread of objective values across vertices
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead downhill simplex on a box. Trial points outside [lower, upper]
/// score +inf, so the simplex contracts toward a bound instead of collapsing on it.
/// Standard coefficients: reflection 1, expansion 2, contraction 1/2, shrink 1/2.
template <class Objective>
SimplexResult nelder_mead(Objective&& objective, std::vector<double> start, const std::vector<double>& steps,
                          const std::vector<double>& lower, const std::vector<double>& upper,
                          const SimplexOptions& opt = {}) {
  const std::size_t dim = start.size();
  if (dim == 0 || steps.size() != dim || lower.size() != dim || upper.size() != dim)
    throw InvalidArgument("nelder_mead: dimension mismatch");

  for (std::size_t k = 0; k < dim; ++k)
    if (!(lower[k] <= upper[k])) throw InvalidArgument("nelder_mead: empty box");
  auto fold = [&](std::vector<double> x) {
    for (std::size_t k = 0; k < dim; ++k) x[k] = std::clamp(x[k], lower[k], upper[k]);
    return x;
  };

  SimplexResult res;
  auto eval = [&](const std::vector<double>& x) {
    for (std::size_t k = 0; k < dim; ++k)
      if (x[k] < lower[k] || x[k] > upper[k]) return std::numeric_limits<double>::infinity();
    ++res.evaluations;
    return static_cast<double>(objective(x));
  };

  std::vector<std::vector<double>> pts(dim + 1, fold(start));
  for (std::size_t k = 0; k < dim; ++k) {
    auto p = pts[0];
    p[k] += steps[k];
    if (p[k] > upper[k]) p[k] = pts[0][k] - steps[k];
    pts[k + 1] = fold(p);
  }
  std::vector<double> vals(dim + 1);
  for (std::size_t i = 0; i <= dim; ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(dim + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    std::vector<std::vector<double>> p2;
    std::vector<double> v2;
    for (auto i : order) {
      p2.push_back(pts[i]);
      v2.push_back(vals[i]);
    }
    pts = std::move(p2);
    vals = std::move(v2);
  };
  auto converged = [&] {
    double extent = 0.0;
    for (std::size_t i = 1; i <= dim; ++i)
      for (std::size_t k = 0; k < dim; ++k)
        extent = std::max(extent, std::abs(pts[i][k] - pts[0][k]) / std::abs(steps[k]));
    return extent <= opt.xtol && vals[dim] - vals[0] <= opt.ftol;
  };

  sort_simplex();
  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    if (converged()) {
      res.converged = true;
      break;
    }
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t k = 0; k < dim; ++k) centroid[k] += pts[i][k] / static_cast<double>(dim);
    auto along = [&](double coef) {
      std::vector<double> p(dim);
      for (std::size_t k = 0; k < dim; ++k) p[k] = centroid[k] + coef * (pts[dim][k] - centroid[k]);
      return p;
    };

    auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < vals[0]) {
      auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[dim] = std::move(xe);
        vals[dim] = fe;
      } else {
        pts[dim] = std::move(xr);
        vals[dim] = fr;
      }
    } else if (fr < vals[dim - 1]) {
      pts[dim] = std::move(xr);
      vals[dim] = fr;
    } else {
      const bool outside = fr < vals[dim];
      auto xc = along(outside ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < (outside ? fr : vals[dim])) {
        pts[dim] = std::move(xc);
        vals[dim] = fc;
      } else {
        for (std::size_t i = 1; i <= dim; ++i) {
          for (std::size_t k = 0; k < dim; ++k) pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
          vals[i] = eval(pts[i]);
        }
      }
    }
    sort_simplex();
  }
  if (!res.converged && converged()) res.converged = true;
  res.x = pts[0];
  res.value = vals[0];
  return res;
}

}  // namespace elfor
