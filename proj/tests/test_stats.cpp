#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "elfor/simplex.hpp"
#include "elfor/stats.hpp"

using namespace elfor;

TEST(MeanSd, PopulationAndSample) {
  const std::vector<double> x{100, 300};
  const auto pop = stats::mean_sd(x);
  EXPECT_DOUBLE_EQ(pop.mean, 200);
  EXPECT_DOUBLE_EQ(pop.sd, 100);
  const auto smp = stats::mean_sd(x, 1);
  EXPECT_NEAR(smp.sd, 141.42135623730951, 1e-12);
}

TEST(Quantile, LinearInterpolationMatchesReference) {
  // reference values from numpy.quantile (linear method)
  std::vector<double> x{3.1, 0.2, 7.7, 4.4, 1.0, 9.9, 5.5};
  std::sort(x.begin(), x.end());
  EXPECT_NEAR(stats::quantile_sorted(x, 0.025), 0.32000000000000006, 1e-14);
  EXPECT_NEAR(stats::quantile_sorted(x, 0.5), 4.4, 1e-14);
  EXPECT_NEAR(stats::quantile_sorted(x, 0.975), 9.57, 1e-14);
  EXPECT_EQ(stats::quantile_sorted(x, 0.0), 0.2);
  EXPECT_EQ(stats::quantile_sorted(x, 1.0), 9.9);
}

TEST(TruncatedMoments, MatchReference) {
  // scipy.stats.truncnorm on [0,1]
  auto m = stats::truncated_normal_moments(0.53, 0.23);
  EXPECT_NEAR(m.mean, 0.524919335287052, 1e-12);
  EXPECT_NEAR(m.sd, 0.20935346082039052, 1e-12);
  m = stats::truncated_normal_moments(0.9, 0.1);
  EXPECT_NEAR(m.mean, 0.8712400029060822, 1e-12);
  EXPECT_NEAR(m.sd, 0.07935277473262076, 1e-12);
}

TEST(TruncatedMoments, MatchQuadrature) {
  // Simpson's rule on the truncated density
  for (auto [mu, sigma] : {std::pair{0.2, 0.3}, std::pair{0.86, 0.085}, std::pair{1.1, 0.4}}) {
    const int n = 20000;
    double z = 0, m1 = 0, m2 = 0;
    for (int i = 0; i <= n; ++i) {
      const double x = static_cast<double>(i) / n;
      const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
      const double d = std::exp(-0.5 * (x - mu) * (x - mu) / (sigma * sigma));
      z += w * d;
      m1 += w * d * x;
      m2 += w * d * x * x;
    }
    const double mean = m1 / z, sd = std::sqrt(m2 / z - mean * mean);
    const auto got = stats::truncated_normal_moments(mu, sigma);
    EXPECT_NEAR(got.mean, mean, 1e-10);
    EXPECT_NEAR(got.sd, sd, 1e-10);
  }
}

TEST(Untruncate, InvertsTruncation) {
  for (auto [mu, sigma] : {std::pair{0.53, 0.23}, std::pair{0.86, 0.085}, std::pair{0.95, 0.2}}) {
    const auto target = stats::truncated_normal_moments(mu, sigma);
    const auto parent = stats::untruncate_moments(target);
    ASSERT_TRUE(parent.has_value());
    EXPECT_NEAR(parent->mean, mu, 1e-9);
    EXPECT_NEAR(parent->sd, sigma, 1e-9);
  }
}

TEST(Untruncate, RejectsUnreachableTargets) {
  EXPECT_FALSE(stats::untruncate_moments({0.5, 0.3}).has_value());  // wider than uniform
  EXPECT_FALSE(stats::untruncate_moments({1.2, 0.1}).has_value());
  EXPECT_FALSE(stats::untruncate_moments({0.5, 0.0}).has_value());
}

TEST(NelderMead, FindsQuadraticMinimum) {
  auto f = [](const std::vector<double>& x) { return (x[0] - 0.3) * (x[0] - 0.3) + 2 * (x[1] - 2.0) * (x[1] - 2.0); };
  SimplexOptions opt;
  opt.xtol = 1e-6;
  const auto r = nelder_mead(f, {0.0, 0.0}, {0.1, 0.5}, {-1, -5}, {1, 5}, opt);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 0.3, 1e-4);
  EXPECT_NEAR(r.x[1], 2.0, 1e-4);
}

TEST(NelderMead, RespectsBounds) {
  auto f = [](const std::vector<double>& x) { return (x[0] + 1) * (x[0] + 1); };
  int outside = 0;
  auto g = [&](const std::vector<double>& x) {
    if (x[0] < 0 || x[0] > 1) ++outside;
    return f(x);
  };
  const auto r = nelder_mead(g, {0.5}, {0.2}, {0.0}, {1.0});
  EXPECT_EQ(outside, 0);
  EXPECT_NEAR(r.x[0], 0.0, 1e-3);
}
