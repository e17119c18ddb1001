#include "biogan/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "biogan/error.hpp"

namespace biogan::eval {

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("wilcoxon: samples must have equal length");
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (!std::isfinite(d)) throw ArgumentError("wilcoxon: non-finite sample");
    if (d != 0.0) diff.push_back(d);
  }
  const int n = static_cast<int>(diff.size());
  if (n == 0) throw UndefinedStatisticError("wilcoxon: every paired difference is zero");
  if (n < 6) {
    throw ArgumentError("wilcoxon: needs at least 6 nonzero differences, got " + std::to_string(n));
  }

  // Doubled average ranks stay integral: a tie block over positions
  // i..j (1-based) gets rank (i + j) / 2, doubled i + j.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return std::fabs(diff[x]) < std::fabs(diff[y]); });
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (int i = 0; i < n;) {
    int j = i;
    while (j + 1 < n && std::fabs(diff[order[j + 1]]) == std::fabs(diff[order[i]])) ++j;
    for (int k = i; k <= j; ++k) rank2[order[k]] = (i + 1) + (j + 1);
    const double t = j - i + 1;
    tie_term += t * t * t - t;
    i = j + 1;
  }

  long w_plus2 = 0;
  long total2 = 0;
  for (int i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (diff[i] > 0) w_plus2 += rank2[i];
  }
  WilcoxonResult r;
  r.n = n;
  r.statistic = (2.0 * w_plus2 - total2) / 2.0;

  if (n <= kWilcoxonExactLimit) {
    // Number of sign patterns reaching each doubled W+.
    std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
    ways[0] = 1.0;
    long reach = 0;
    for (int i = 0; i < n; ++i) {
      reach += rank2[i];
      for (long s = reach; s >= rank2[i]; --s) ways[s] += ways[s - rank2[i]];
    }
    // |T| >= |t| with T = 2 W+ - total, in doubled units.
    const long t_obs = std::labs(2 * w_plus2 - total2);
    double extreme = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (std::labs(2 * s - total2) >= t_obs) extreme += ways[s];
    }
    r.p_value = std::min(1.0, extreme / std::ldexp(1.0, n));
    r.exact = true;
    return r;
  }

  const double nn = n;
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double w_plus = w_plus2 / 2.0;
  const double dev = std::max(0.0, std::fabs(w_plus - mean) - 0.5);
  const double z = var > 0.0 ? dev / std::sqrt(var) : 0.0;
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  r.exact = false;
  return r;
}

double icc3k(const std::vector<std::vector<double>>& ratings) {
  const std::size_t n = ratings.size();
  if (n < 2) throw ArgumentError("icc3k: needs at least 2 targets");
  const std::size_t k = ratings.front().size();
  if (k < 2) throw ArgumentError("icc3k: needs at least 2 raters");
  for (const auto& row : ratings) {
    if (row.size() != k) throw ArgumentError("icc3k: every target needs a rating from every rater");
    for (double v : row) {
      if (!std::isfinite(v)) throw ArgumentError("icc3k: ratings must be finite");
    }
  }
  std::vector<double> row_mean(n, 0.0);
  std::vector<double> col_mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      row_mean[i] += ratings[i][j];
      col_mean[j] += ratings[i][j];
    }
  }
  for (double& v : row_mean) v /= static_cast<double>(k);
  for (double& v : col_mean) v /= static_cast<double>(n);
  double grand = 0.0;
  for (double v : col_mean) grand += v;
  grand /= static_cast<double>(k);

  double ss_rows = 0.0;
  for (double m : row_mean) ss_rows += (m - grand) * (m - grand);
  ss_rows *= static_cast<double>(k);
  double ss_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double e = ratings[i][j] - row_mean[i] - col_mean[j] + grand;
      ss_err += e * e;
    }
  }
  const double ms_rows = ss_rows / static_cast<double>(n - 1);
  const double ms_err = ss_err / static_cast<double>((n - 1) * (k - 1));
  if (!(ms_rows > 0.0)) throw UndefinedStatisticError("icc3k: targets have zero between-target variance");
  return (ms_rows - ms_err) / ms_rows;
}

}  // namespace biogan::eval
