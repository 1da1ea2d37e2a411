#pragma once

#include <vector>

namespace riskbench {

double normal_cdf(double z);
double normal_sf(double z);
double chi_square_sf(double x, double df);
double student_t_sf(double t, double df);

// P(X <= k) for X ~ Binomial(n, 1/2); exact, used by the paired test on
// small discordant counts.
double binomial_half_cdf(int k, int n);

double mean(const std::vector<double>& v);
double sample_variance(const std::vector<double>& v);

// Quantile with linear interpolation between order statistics; q in [0,1].
double quantile(std::vector<double> v, double q);

struct TTestResult {
  double statistic;
  double df;
  double p_value;
  double mean_a;
  double mean_b;
};

// Unequal-variance two-sample t test with Welch-Satterthwaite degrees of
// freedom. Requires at least two observations per group and nonzero pooled
// variance.
TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct ChiSquareResult {
  double statistic;
  double df;
  double p_value;
};

// Pearson chi-square test of independence on an r x c contingency table of
// counts. Throws if any row or column sums to zero.
ChiSquareResult chi_square_test(const std::vector<std::vector<double>>& counts);

}  // namespace riskbench
