#include "nortasp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace nortasp {
namespace {

EmpiricalMarginal marginal(std::vector<double> v) { return EmpiricalMarginal(v); }

TEST(EcdfTest, CountsSamplesAtOrBelow) {
  EXPECT_DOUBLE_EQ(ecdf_eval(marginal({1, 2, 2, 4}), 2.0), 0.75);
  EXPECT_DOUBLE_EQ(ecdf_eval(marginal({5}), 4.9), 0.0);
  EXPECT_DOUBLE_EQ(ecdf_eval(marginal({0, 1}), 10.0), 1.0);
}

TEST(EcdfTest, RightContinuousSteps) {
  const auto m = marginal({3, 1, 2});
  EXPECT_DOUBLE_EQ(m.cdf(0.999), 0.0);
  EXPECT_DOUBLE_EQ(m.cdf(1.0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.cdf(std::nextafter(2.0, 0.0)), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.cdf(3.0), 1.0);
}

TEST(EcdfTest, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(marginal({}), ContractError);
  EXPECT_THROW(marginal({1.0, std::nan("")}), ContractError);
}

TEST(EcdfQuantileTest, GeneralizedInverse) {
  const auto m = marginal({1, 2, 2, 4});
  EXPECT_EQ(ecdf_quantile(m, 0.5), 2.0);
  EXPECT_EQ(ecdf_quantile(m, 1.0), 4.0);
  EXPECT_EQ(ecdf_quantile(m, 0.25), 1.0);
  EXPECT_EQ(ecdf_quantile(m, 0.2500001), 2.0);
  const auto atom = marginal({7});
  for (double u : {1e-12, 0.3, 1.0}) EXPECT_EQ(ecdf_quantile(atom, u), 7.0);
}

TEST(EcdfQuantileTest, DomainErrors) {
  const auto m = marginal({1, 2});
  EXPECT_THROW(ecdf_quantile(m, 0.0), std::domain_error);
  EXPECT_THROW(ecdf_quantile(m, -0.1), std::domain_error);
  EXPECT_THROW(ecdf_quantile(m, 1.0000001), std::domain_error);
}

TEST(EcdfQuantileTest, RoundTripProperty) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> value(0, 6);
  std::uniform_int_distribution<int> size(1, 25);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(size(rng)));
    for (auto& x : v) x = value(rng);
    const auto m = marginal(v);
    for (double s : v) {
      const double q = ecdf_quantile(m, ecdf_eval(m, s));
      EXPECT_LE(q, s);
      // Every sample value is the smallest one attaining its own CDF level.
      EXPECT_EQ(q, s);
    }
  }
}

TEST(EcdfQuantileTest, NormalScoreRouteAgreesWithQuantile) {
  const auto m = marginal({0, 0, 1, 3, 3, 3, 8, 9});
  for (double z = -4.0; z <= 4.0; z += 0.01) {
    EXPECT_EQ(m.from_normal_score(z), m.quantile(normal_cdf(z))) << "z=" << z;
  }
}

TEST(NormalTest, SymmetryPoints) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_DOUBLE_EQ(normal_quantile(0.5), 0.0);
}

TEST(NormalTest, CdfMatchesSeriesOracle) {
  // Oracle value for Phi(1.959963985): 0.97500000002688156...
  EXPECT_NEAR(normal_cdf(1.959963985), 0.975, 1e-10);
  EXPECT_NEAR(normal_cdf(1.959963985), 0.9750000000268815623, 1e-15);
  for (double z = -8.0; z <= 8.0; z += 0.0625) {
    const auto expected = static_cast<double>(oracle::normal_cdf_series(z));
    EXPECT_NEAR(normal_cdf(z), expected, 1e-10) << "z=" << z;
  }
}

TEST(NormalTest, CdfFrozenValues) {
  // 25-digit references.
  EXPECT_NEAR(normal_cdf(-6.0), 9.865876450376981407e-10, 1e-22);
  EXPECT_NEAR(normal_cdf(-1.0), 0.1586552539314570514, 1e-16);
  EXPECT_NEAR(normal_cdf(2.5), 0.9937903346742238648, 1e-15);
}

TEST(NormalTest, QuantileInvertsCdf) {
  for (double z = -6.0; z <= 6.0; z += 0.001) {
    EXPECT_NEAR(normal_quantile(normal_cdf(z)), z, 1e-8) << "z=" << z;
  }
}

TEST(NormalTest, CdfIsNonDecreasing) {
  double prev = 0.0;
  for (double z = -9.0; z <= 9.0; z += 1e-3) {
    const double v = normal_cdf(z);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(NormalTest, QuantileDomain) {
  EXPECT_THROW(normal_quantile(0.0), std::domain_error);
  EXPECT_THROW(normal_quantile(1.0), std::domain_error);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_quantile(1e-300), -37.04710, 1e-4);
}

TEST(PearsonTest, Examples) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_DOUBLE_EQ(pearson_corr(x, std::vector<double>{2, 4, 6}), 1.0);
  EXPECT_DOUBLE_EQ(pearson_corr(x, std::vector<double>{3, 2, 1}), -1.0);
  // Hand computation: sxy = 4, sxx = syy = 5.
  EXPECT_NEAR(pearson_corr(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}), 0.8,
              1e-15);
}

TEST(PearsonTest, Errors) {
  const std::vector<double> c{2, 2, 2};
  EXPECT_THROW(pearson_corr(std::vector<double>{1, 2, 3}, c), UndefinedCorrelationError);
  EXPECT_THROW(pearson_corr(std::vector<double>{1}, std::vector<double>{1}), ContractError);
  EXPECT_THROW(pearson_corr(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}),
               ContractError);
  EXPECT_EQ(pearson_corr_or_zero(std::vector<double>{1, 2, 3}, c), 0.0);
}

TEST(EmdTest, Examples) {
  EXPECT_EQ(emd(marginal({1, 3, 3}), marginal({1, 3, 3})), 0.0);
  EXPECT_DOUBLE_EQ(emd(marginal({0}), marginal({1})), 1.0);
  EXPECT_EQ(emd(marginal({0, 1}), marginal({0, 0, 1, 1})), 0.0);
}

// 1-D Wasserstein-1 with equal sample counts is the mean absolute difference
// of the sorted samples.
double sorted_matching_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

TEST(EmdTest, EqualsSortedMatchingForEqualCounts) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(1, 10);
  std::normal_distribution<double> value(0.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<std::size_t>(size(rng));
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = std::round(value(rng) * 4.0) / 4.0;
    for (auto& x : b) x = std::round(value(rng) * 4.0) / 4.0;
    EXPECT_NEAR(emd(marginal(a), marginal(b)), sorted_matching_distance(a, b), 1e-12);
  }
}

TEST(EmdTest, MetricProperties) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_int_distribution<int> value(-5, 5);
  auto draw = [&] {
    std::vector<double> v(static_cast<std::size_t>(size(rng)));
    for (auto& x : v) x = value(rng);
    return marginal(v);
  };
  for (int trial = 0; trial < 500; ++trial) {
    const auto f = draw(), g = draw(), h = draw();
    EXPECT_NEAR(emd(f, g), emd(g, f), 1e-12);
    EXPECT_LE(emd(f, h), emd(f, g) + emd(g, h) + 1e-12);
    EXPECT_GE(emd(f, g), 0.0);
    EXPECT_EQ(emd(f, f), 0.0);
  }
}

TEST(SummaryTest, SevenRows) {
  const std::vector<double> v{4, 1, 3, 2};
  const SummaryStats s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.q25, 1.75);
  EXPECT_DOUBLE_EQ(s.q50, 2.5);
  EXPECT_DOUBLE_EQ(s.q75, 3.25);
  EXPECT_EQ(s.max, 4.0);
}

TEST(SummaryTest, SingleValue) {
  const SummaryStats s = summarize(std::vector<double>{3.5});
  EXPECT_EQ(s.std, 0.0);
  for (std::size_t r : {0u, 2u, 3u, 4u, 5u, 6u}) EXPECT_EQ(s.row(r), 3.5);
}

}  // namespace
}  // namespace nortasp
