#include "regwave/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "regwave/errors.hpp"

namespace regwave {

double mean(const std::vector<double>& x) {
  if (x.empty()) throw DataError("mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double standard_error(const std::vector<double>& x) {
  if (x.empty()) throw DataError("standard error of an empty sample");
  return std::sqrt(sample_variance(x) / static_cast<double>(x.size()));
}

double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DataError("correlation needs paired samples");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("correlation of a constant sample");
  return sxy / std::sqrt(sxx * syy);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DataError("slope fit needs paired samples");
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw DataError("log-log fit needs positive data");
    lx.push_back(std::log(x[k]));
    ly.push_back(std::log(y[k]));
  }
  const double mx = mean(lx), my = mean(ly);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  return sxy / sxx;
}

double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw DataError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("quantile level must lie in [0, 1]");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DataError("KS distance of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    best = std::max(best, std::abs(i / na - j / nb));
  }
  // Once one sample is exhausted the gap only shrinks.
  return best;
}

double ks_p_value(double distance, std::size_t na, std::size_t nb) {
  const double ne = static_cast<double>(na) * nb / static_cast<double>(na + nb);
  // Kolmogorov tail 2 sum (-1)^{k-1} exp(-2 k^2 t^2) with the Stephens
  // small-sample correction of t.
  const double t = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * distance;
  if (t < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

ChiSquareResult chi_square_test(const std::vector<long long>& counts,
                                const std::vector<double>& probabilities) {
  if (counts.size() != probabilities.size() || counts.size() < 2)
    throw ParameterError("chi-square test needs matching count and probability lists");
  long long total = 0;
  for (long long c : counts) total += c;
  if (total <= 0) throw DataError("chi-square test on zero observations");
  ChiSquareResult out;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (!(probabilities[k] > 0.0)) throw ParameterError("expected probabilities must be positive");
    const double e = probabilities[k] * static_cast<double>(total);
    out.statistic += (counts[k] - e) * (counts[k] - e) / e;
  }
  out.dof = static_cast<int>(counts.size()) - 1;
  boost::math::chi_squared dist(out.dof);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

ChiSquareResult symmetry_test(const std::vector<std::vector<long long>>& table) {
  const std::size_t k = table.size();
  for (const auto& row : table)
    if (row.size() != k) throw ParameterError("symmetry test needs a square table");
  ChiSquareResult out;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      const double sum = static_cast<double>(table[a][b] + table[b][a]);
      if (sum <= 0.0) continue;
      const double diff = static_cast<double>(table[a][b] - table[b][a]);
      out.statistic += diff * diff / sum;
      ++out.dof;
    }
  if (out.dof == 0) return out;
  boost::math::chi_squared dist(out.dof);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

}  // namespace regwave
