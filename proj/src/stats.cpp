#include "riskbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace riskbench {

double normal_cdf(double z) {
  static const boost::math::normal_distribution<double> n01;
  return boost::math::cdf(n01, z);
}

double normal_sf(double z) {
  static const boost::math::normal_distribution<double> n01;
  return boost::math::cdf(boost::math::complement(n01, z));
}

double chi_square_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double student_t_sf(double t, double df) {
  boost::math::students_t_distribution<double> dist(df);
  return boost::math::cdf(boost::math::complement(dist, t));
}

double binomial_half_cdf(int k, int n) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  // Work in log space per term; n stays small for the exact branch so a
  // direct sum is fine.
  double total = 0.0;
  double log_half_n = -static_cast<double>(n) * std::log(2.0);
  double log_comb = 0.0;  // log C(n, 0)
  for (int i = 0; i <= k; ++i) {
    total += std::exp(log_comb + log_half_n);
    log_comb += std::log(static_cast<double>(n - i)) - std::log(static_cast<double>(i + 1));
  }
  return std::min(total, 1.0);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of empty vector");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("sample_variance needs at least 2 values");
  double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty vector");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level outside [0,1]");
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  size_t lo = static_cast<size_t>(std::floor(pos));
  size_t hi = static_cast<size_t>(std::ceil(pos));
  double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("welch_t_test needs at least 2 observations per group");
  double ma = mean(a), mb = mean(b);
  double va = sample_variance(a), vb = sample_variance(b);
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double se2 = va / na + vb / nb;
  if (se2 <= 0.0)
    throw std::invalid_argument("welch_t_test: zero variance in both groups");
  double t = (ma - mb) / std::sqrt(se2);
  double df = se2 * se2 /
              (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
  double p = 2.0 * student_t_sf(std::fabs(t), df);
  return {t, df, std::min(p, 1.0), ma, mb};
}

ChiSquareResult chi_square_test(const std::vector<std::vector<double>>& counts) {
  size_t r = counts.size();
  if (r < 2) throw std::invalid_argument("chi_square_test needs at least 2 rows");
  size_t c = counts[0].size();
  if (c < 2) throw std::invalid_argument("chi_square_test needs at least 2 columns");
  for (const auto& row : counts)
    if (row.size() != c)
      throw std::invalid_argument("chi_square_test: ragged contingency table");

  std::vector<double> row_sum(r, 0.0), col_sum(c, 0.0);
  double total = 0.0;
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) {
      if (counts[i][j] < 0.0)
        throw std::invalid_argument("chi_square_test: negative count");
      row_sum[i] += counts[i][j];
      col_sum[j] += counts[i][j];
      total += counts[i][j];
    }
  for (double s : row_sum)
    if (s == 0.0) throw std::invalid_argument("chi_square_test: empty row");
  for (double s : col_sum)
    if (s == 0.0) throw std::invalid_argument("chi_square_test: empty column");

  double stat = 0.0;
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) {
      double expected = row_sum[i] * col_sum[j] / total;
      double diff = counts[i][j] - expected;
      stat += diff * diff / expected;
    }
  double df = static_cast<double>((r - 1) * (c - 1));
  return {stat, df, chi_square_sf(stat, df)};
}

}  // namespace riskbench
