#pragma once

#include <span>
#include <vector>

namespace biogan::eval {

struct WilcoxonResult {
  /// W+ - W-, the signed rank sum. Swapping the samples negates it.
  double statistic = 0.0;
  double p_value = 1.0;  // two-sided
  int n = 0;             // pairs with a nonzero difference
  bool exact = false;
};

/// Paired two-sided signed-rank test. Zero differences are dropped and tied
/// magnitudes share their average rank. Exact null distribution for n <= 25,
/// normal approximation with tie and continuity corrections above.
/// Throws UndefinedStatisticError when every difference is zero and
/// ArgumentError for unequal lengths or fewer than 6 nonzero differences.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

inline constexpr int kWilcoxonExactLimit = 25;

/// ICC(3,k): two-way mixed effects, consistency, mean of k raters.
/// ratings[i][j] is target i scored by rater j.
/// Throws ArgumentError for fewer than 2 targets or raters or ragged rows, and
/// UndefinedStatisticError when the targets do not vary.
double icc3k(const std::vector<std::vector<double>>& ratings);

}  // namespace biogan::eval
