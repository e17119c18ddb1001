#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "biogan/error.hpp"
#include "biogan/eval/stats.hpp"
#include "biogan/random.hpp"

namespace biogan::eval {
namespace {

namespace oracle = testing::oracle;

TEST(Wilcoxon, AllGreaterGivesMinimalExactP) {
  std::vector<double> a, b;
  for (int i = 0; i < 10; ++i) {
    a.push_back(10.0 + i * 1.5);
    b.push_back(i);
  }
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.n, 10);
  EXPECT_EQ(r.p_value, 2.0 / 1024.0);
  EXPECT_EQ(r.statistic, 55.0);
}

TEST(Wilcoxon, ErrorCases) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7};
  EXPECT_THROW(wilcoxon_signed_rank(x, x), UndefinedStatisticError);
  const std::vector<double> y{1, 2, 3, 4, 5, 6};
  EXPECT_THROW(wilcoxon_signed_rank(x, y), ArgumentError);
  // five nonzero differences after dropping zeros
  const std::vector<double> z{2, 3, 4, 5, 6, 6, 7};
  EXPECT_THROW(wilcoxon_signed_rank(x, z), ArgumentError);
}

TEST(Wilcoxon, MatchesSignPatternEnumeration) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 6 + static_cast<int>(rng.below(7));
    std::vector<double> a, b;
    for (int i = 0; i < n; ++i) {
      // half-integer grid forces tied magnitudes and occasional zeros
      a.push_back(static_cast<double>(rng.below(9)) * 0.5);
      b.push_back(static_cast<double>(rng.below(9)) * 0.5);
    }
    int nonzero = 0;
    for (int i = 0; i < n; ++i) nonzero += a[i] != b[i];
    if (nonzero < 6) continue;
    const auto r = wilcoxon_signed_rank(a, b);
    EXPECT_TRUE(r.exact);
    EXPECT_NEAR(r.p_value, oracle::wilcoxon_exact_p(a, b), 1e-12) << "trial " << trial;
  }
}

TEST(Wilcoxon, TwelvePairFixture) {
  const std::vector<double> a{3.1, 4.7, 2.2, 5.0, 6.4, 1.9, 3.3, 4.4, 5.8, 2.6, 4.1, 3.9};
  const std::vector<double> b{2.4, 4.9, 1.1, 3.7, 5.5, 2.3, 2.1, 3.9, 4.6, 2.6, 2.8, 4.0};
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_EQ(r.n, 11);
  EXPECT_NEAR(r.p_value, oracle::wilcoxon_exact_p(a, b), 1e-12);
}

TEST(Wilcoxon, NineteenPairsUseExactDistribution) {
  std::vector<double> a, b;
  for (int i = 1; i < 20; ++i) {
    a.push_back(std::fmod(i * 1.7, 5.3) + 0.01 * i);
    b.push_back(std::fmod(i * 2.9, 4.1));
  }
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_value, oracle::wilcoxon_exact_p(a, b), 1e-12);
}

TEST(Wilcoxon, SwappingNegatesStatistic) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a, b;
    const int n = 6 + static_cast<int>(rng.below(30));
    for (int i = 0; i < n; ++i) {
      a.push_back(static_cast<double>(rng.below(20)));
      b.push_back(static_cast<double>(rng.below(20)) + 0.5);
    }
    const auto ab = wilcoxon_signed_rank(a, b);
    const auto ba = wilcoxon_signed_rank(b, a);
    EXPECT_EQ(ab.statistic, -ba.statistic);
    EXPECT_EQ(ab.p_value, ba.p_value);
  }
}

TEST(Wilcoxon, NormalApproximationAboveTwentyFive) {
  std::vector<double> a, b;
  for (int i = 0; i < 30; ++i) {
    a.push_back((i * 37 % 23) * 0.5 + (i % 3));
    b.push_back((i * 11 % 17) * 0.5);
  }
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_FALSE(r.exact);
  EXPECT_EQ(r.n, 28);
  // scipy.stats.wilcoxon(a, b, correction=True, method="approx")
  EXPECT_NEAR(r.p_value, 0.008793295062031596, 1e-12);
}

TEST(Icc3k, SixByTwoFixture) {
  const std::vector<std::vector<double>> r{{9, 2}, {6, 1}, {8, 4}, {7, 1}, {10, 5}, {6, 2}};
  // MS_rows = 281/60, MS_error = 41/60
  EXPECT_NEAR(icc3k(r), 240.0 / 281.0, 1e-12);
  EXPECT_NEAR(icc3k(r), oracle::icc3k(r), 1e-9);
}

TEST(Icc3k, MatchesAnovaOracle) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(10));
    const int k = 2 + static_cast<int>(rng.below(4));
    std::vector<std::vector<double>> r(n, std::vector<double>(k));
    for (auto& row : r) {
      const double base = 10.0 * rng.uniform();
      for (double& v : row) v = base + 4.0 * rng.uniform() - 2.0;
    }
    EXPECT_NEAR(icc3k(r), oracle::icc3k(r), 1e-9);
  }
}

TEST(Icc3k, PerfectAgreementIsOne) {
  const std::vector<std::vector<double>> r{{1, 1}, {4, 4}, {2, 2}, {8, 8}, {3, 3}};
  EXPECT_EQ(icc3k(r), 1.0);
  // a constant rater offset is still perfect consistency
  const std::vector<std::vector<double>> shifted{{1, 3}, {4, 6}, {2, 4}, {8, 10}};
  EXPECT_EQ(icc3k(shifted), 1.0);
}

TEST(Icc3k, ErrorCases) {
  EXPECT_THROW(icc3k({{2, 2}, {2, 2}, {2, 2}}), UndefinedStatisticError);
  EXPECT_THROW(icc3k({{1, 2}}), ArgumentError);
  EXPECT_THROW(icc3k({{1}, {2}}), ArgumentError);
  EXPECT_THROW(icc3k({{1, 2}, {3}}), ArgumentError);
}

TEST(Icc3k, WhiteNoiseNearZero) {
  Rng rng(5);
  std::vector<std::vector<double>> r(4000, std::vector<double>(3));
  for (auto& row : r) {
    for (double& v : row) v = rng.normal();
  }
  EXPECT_NEAR(icc3k(r), 0.0, 0.1);
}

}  // namespace
}  // namespace biogan::eval
