#pragma once

#include <vector>

namespace regwave {

double mean(const std::vector<double>& x);
// Unbiased sample variance; zero for fewer than two points.
double sample_variance(const std::vector<double>& x);
double standard_error(const std::vector<double>& x);
double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y);
// Least-squares slope of log y against log x (all entries positive).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);
// Empirical quantile with linear interpolation, q in [0, 1].
double quantile(std::vector<double> x, double q);
double median(std::vector<double> x);

// sup_x |F_a(x) - F_b(x)| over the pooled sample.
double ks_distance(std::vector<double> a, std::vector<double> b);
// Asymptotic two-sample p-value from the Kolmogorov distribution.
double ks_p_value(double distance, std::size_t na, std::size_t nb);

// Pearson statistic and upper-tail p-value of observed counts against
// expected probabilities (k - 1 degrees of freedom).
struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};
ChiSquareResult chi_square_test(const std::vector<long long>& counts,
                                const std::vector<double>& probabilities);

// Bowker symmetry test of a square contingency table: sum over a < b with
// n_ab + n_ba > 0 of (n_ab - n_ba)^2 / (n_ab + n_ba), one degree of freedom
// per such pair. No such pair gives statistic 0, dof 0, p-value 1.
ChiSquareResult symmetry_test(const std::vector<std::vector<long long>>& table);

}  // namespace regwave
