#include "regwave/edge_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <lapacke.h>

#include "regwave/errors.hpp"
#include "regwave/isomorphism.hpp"
#include "regwave/parallel.hpp"
#include "regwave/quadrature.hpp"
#include "regwave/resampling.hpp"
#include "regwave/tree_green.hpp"

namespace regwave {

namespace {

std::ostringstream csv_stream() {
  std::ostringstream out;
  out.precision(17);
  return out;
}

Eigen::VectorXd column_for(const SpectralDecomposition& sd, int s) {
  const int c = sd.column_of(s);
  if (c < 0 || sd.eigenvectors.cols() <= c)
    throw ParameterError("eigenvector " + std::to_string(s) + " not available");
  return sd.eigenvectors.col(c);
}

double eigenvalue_for(const SpectralDecomposition& sd, int s) {
  const int c = sd.column_of(s);
  if (c < 0) throw ParameterError("eigenvalue " + std::to_string(s) + " not available");
  return sd.eigenvalues(c);
}

// Ball prefix up to `radius` is a tree: induced edges = vertices - 1.
bool prefix_is_tree(const TreeBall& b, int radius, int& size) {
  size = 0;
  for (int dep : b.depth) size += dep <= radius;
  int edges = 0;
  for (auto [p, q] : b.local_edges) edges += b.depth[p] <= radius && b.depth[q] <= radius;
  return edges == size - 1;
}

// Integral over [a, b] split at the interior breakpoints.
double integrate_pieces(const AdaptiveSimpson& rule, const std::function<double(double)>& f,
                        double a, double b, std::vector<double> breaks) {
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0, left = a;
  for (double x : breaks) {
    if (x <= left || x >= b) continue;
    total += rule(f, left, x);
    left = x;
  }
  return total + rule(f, left, b);
}

// Composite 8-point Gauss-Legendre with `panels` equal panels on [a, b].
double composite_gauss(const std::function<double(double)>& g, double a, double b, int panels) {
  if (!(a < b)) return 0.0;
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p)
    total += boost::math::quadrature::gauss<double, 8>::integrate(g, a + p * h, a + (p + 1) * h);
  return total;
}

// Integral of g(x, y) over x in [cuts.front(), cuts.back()] (one piece per
// consecutive cut pair) and y in [y_lo, y_hi], with y = e^t when `log_y`.
// Panel counts double until two levels agree to rel_tol; NumericalError
// after max_level doublings.
double tensor_integral(const std::function<double(double, double)>& g,
                       const std::vector<double>& cuts, double y_lo, double y_hi, bool log_y,
                       int x_panels, int y_panels, double rel_tol, int max_level = 5) {
  const double t_lo = log_y ? std::log(y_lo) : y_lo, t_hi = log_y ? std::log(y_hi) : y_hi;
  auto level_value = [&](int level) {
    const int px = x_panels << level, py = y_panels << level;
    auto over_y = [&](double x) {
      return composite_gauss(
          [&](double t) { return log_y ? g(x, std::exp(t)) * std::exp(t) : g(x, t); }, t_lo,
          t_hi, py);
    };
    double total = 0.0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c)
      total += composite_gauss(over_y, cuts[c], cuts[c + 1], px);
    return total;
  };
  double previous = level_value(0);
  for (int level = 1; level <= max_level; ++level) {
    const double current = level_value(level);
    if (std::abs(current - previous) <= rel_tol * std::abs(current)) return current;
    previous = current;
  }
  throw NumericalError("tensor quadrature did not converge");
}

// Smooth cutoff: 1 on |y| <= gamma, 0 on |y| >= 2 gamma.
struct Cutoff {
  double gamma;

  static double psi(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

  double value(double y) const {
    const double tau = (std::abs(y) - gamma) / gamma;
    if (tau <= 0.0) return 1.0;
    if (tau >= 1.0) return 0.0;
    const double a = psi(1.0 - tau), b = psi(tau);
    return a / (a + b);
  }

  double derivative(double y) const {
    const double tau = (std::abs(y) - gamma) / gamma;
    if (tau <= 0.0 || tau >= 1.0) return 0.0;
    const double a = psi(1.0 - tau), b = psi(tau);
    const double da = -a / ((1.0 - tau) * (1.0 - tau)), db = b / (tau * tau);
    const double ds = (da * b - a * db) / ((a + b) * (a + b));
    return (y < 0.0 ? -ds : ds) / gamma;
  }
};

}  // namespace

// ----- ensembles -------------------------------------------------------------

bool EnsembleSample::near_degenerate(int s) const {
  const int c = s - 2;
  if (c < 0 || c >= static_cast<int>(eigenvalues.size())) return false;
  if (c > 0 && std::abs(eigenvalues[c] - eigenvalues[c - 1]) < kDegeneracyGap) return true;
  return c + 1 < static_cast<int>(eigenvalues.size()) &&
         std::abs(eigenvalues[c] - eigenvalues[c + 1]) < kDegeneracyGap;
}

EnsembleSample generate_ensemble_sample(const EnsembleOptions& options, std::uint64_t seed) {
  if (options.k < 1) throw ParameterError("k must be positive");
  if (options.radius < 0) throw ParameterError("radius must be nonnegative");
  if (options.centers < 1 || options.centers > options.n)
    throw ParameterError("centers must lie in [1, n]");
  Rng rng(seed);
  const RegularGraph g = sample_regular_graph(options.n, options.d, rng);

  SpectralDecomposition sd;
  if (options.method == SpectralMethod::kDense) {
    sd = eigendecompose(g);
  } else {
    LanczosOptions lanczos;
    lanczos.seed = derive_seed(seed, 1);
    sd = extreme_eigenpairs(g, options.k, SpectrumSide::kTop, lanczos);
  }

  EnsembleSample out;
  out.seed = seed;
  out.n = options.n;
  out.d = options.d;
  std::vector<Eigen::VectorXd> vectors;
  for (int s = 2; s <= options.k + 1; ++s) {
    const double lambda = eigenvalue_for(sd, s);
    out.eigenvalues.push_back(lambda);
    out.rescaled_eigenvalues.push_back(edge_rescale(lambda, options.n, options.d));
    vectors.push_back(column_for(sd, s));
    out.fourth_moments.push_back(static_cast<double>(options.n) * vectors.back().array().pow(4).sum());
  }

  std::set<Vertex> chosen;
  std::uniform_int_distribution<Vertex> pick(0, options.n - 1);
  const double root_n = std::sqrt(static_cast<double>(options.n));
  while (static_cast<int>(chosen.size()) < options.centers) {
    const Vertex v = pick(rng);
    if (!chosen.insert(v).second) continue;
    WaveRestriction w;
    w.ball = ball(g, v, options.radius);
    for (const Eigen::VectorXd& u : vectors) {
      std::vector<double> values;
      values.reserve(w.ball.size());
      for (Vertex x : w.ball.vertices) values.push_back(root_n * u(x));
      w.values.push_back(std::move(values));
    }
    out.wave_restrictions.push_back(std::move(w));
  }
  return out;
}

std::vector<EnsembleSample> generate_ensemble(const EnsembleOptions& options,
                                              std::uint64_t master_seed, int count, int workers) {
  if (count < 0) throw ParameterError("ensemble size must be nonnegative");
  std::vector<EnsembleSample> out(count);
  parallel_for(count, workers, [&](std::size_t i) {
    out[i] = generate_ensemble_sample(options, derive_seed(master_seed, i));
  });
  return out;
}

std::string ensemble_csv(const std::vector<EnsembleSample>& samples) {
  std::ostringstream out = csv_stream();
  out << "seed,s,lambda,rescaled\n";
  for (const EnsembleSample& e : samples)
    for (int s = 2; s <= e.max_index(); ++s)
      out << e.seed << ',' << s << ',' << e.eigenvalue(s) << ',' << e.rescaled(s) << '\n';
  return out.str();
}

// ----- reports ---------------------------------------------------------------

bool Metric::passed() const {
  switch (gate) {
    case Gate::kReport:
      return true;
    case Gate::kAtMost:
      return value <= bound;
    case Gate::kAtLeast:
      return value >= bound;
    case Gate::kWithin:
      return std::abs(value - target) <= bound;
  }
  return false;
}

bool ExperimentReport::passed() const {
  return std::all_of(metrics.begin(), metrics.end(), [](const Metric& m) { return m.passed(); });
}

const Metric& ExperimentReport::metric(const std::string& metric_name) const {
  for (const Metric& m : metrics)
    if (m.name == metric_name) return m;
  throw ParameterError("no metric named " + metric_name);
}

namespace {

const char* gate_name(Gate g) {
  switch (g) {
    case Gate::kReport:
      return "report";
    case Gate::kAtMost:
      return "at-most";
    case Gate::kAtLeast:
      return "at-least";
    case Gate::kWithin:
      return "within";
  }
  return "report";
}

Gate gate_from_name(const std::string& s) {
  for (Gate g : {Gate::kReport, Gate::kAtMost, Gate::kAtLeast, Gate::kWithin})
    if (s == gate_name(g)) return g;
  throw ParameterError("unknown gate " + s);
}

}  // namespace

nlohmann::json to_json(const Metric& m) {
  nlohmann::json j = {{"name", m.name}, {"value", m.value}, {"gate", gate_name(m.gate)},
                      {"pass", m.passed()}};
  if (m.gate != Gate::kReport) j["bound"] = m.bound;
  if (m.gate == Gate::kWithin) j["target"] = m.target;
  return j;
}

nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json metrics = nlohmann::json::array();
  for (const Metric& m : r.metrics) metrics.push_back(to_json(m));
  return {{"name", r.name},
          {"pass", r.passed()},
          {"sample-count", r.sample_count},
          {"config-hash", r.config_hash},
          {"metrics", metrics},
          {"details", r.details},
          {"timing", {{"runtime-seconds", r.runtime_seconds}}}};
}

ExperimentReport report_from_json(const nlohmann::json& j) {
  try {
    ExperimentReport r;
    r.name = j.at("name").get<std::string>();
    r.sample_count = j.at("sample-count").get<long long>();
    r.config_hash = j.at("config-hash").get<std::string>();
    r.details = j.value("details", nlohmann::json::object());
    if (j.contains("timing")) r.runtime_seconds = j["timing"].value("runtime-seconds", 0.0);
    for (const auto& m : j.at("metrics")) {
      Metric metric;
      metric.name = m.at("name").get<std::string>();
      metric.value = m.at("value").get<double>();
      metric.gate = gate_from_name(m.at("gate").get<std::string>());
      metric.bound = m.value("bound", 0.0);
      metric.target = m.value("target", 0.0);
      r.metrics.push_back(metric);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed report: ") + e.what());
  }
}

// ----- edge reference samplers ---------------------------------------------

Tridiagonal gaussian_tridiagonal(int n, Rng& rng) {
  if (n < 2) throw ParameterError("tridiagonal model needs n >= 2");
  Tridiagonal t;
  std::normal_distribution<double> diag(0.0, std::numbers::sqrt2);
  t.diagonal.resize(n);
  for (double& a : t.diagonal) a = diag(rng);
  t.off_diagonal.resize(n - 1);
  for (int i = 0; i < n - 1; ++i) {
    std::chi_squared_distribution<double> chi2(n - 1 - i);
    t.off_diagonal[i] = std::sqrt(chi2(rng));
  }
  return t;
}

std::vector<double> top_tridiagonal_eigenvalues(const Tridiagonal& t, int k) {
  const int n = static_cast<int>(t.diagonal.size());
  if (k < 1 || k > n) throw ParameterError("k must lie in [1, n]");
  if (static_cast<int>(t.off_diagonal.size()) != n - 1)
    throw ParameterError("off-diagonal length must be n - 1");
  lapack_int found = 0, nsplit = 0;
  std::vector<double> w(n);
  std::vector<lapack_int> iblock(n), isplit(n);
  const int info = LAPACKE_dstebz('I', 'E', n, 0.0, 0.0, n - k + 1, n,
                                  2.0 * LAPACKE_dlamch('S'), t.diagonal.data(),
                                  t.off_diagonal.data(), &found, &nsplit, w.data(),
                                  iblock.data(), isplit.data());
  if (info != 0 || found != k) throw NumericalError("tridiagonal bisection failed");
  std::vector<double> out(w.begin(), w.begin() + k);
  std::sort(out.rbegin(), out.rend());
  return out;
}

std::vector<double> airy1_reference(int k, int embed_n, Rng& rng) {
  if (embed_n < 200) throw ParameterError("embed_n must be at least 200");
  if (k < 1 || k > 10) throw ParameterError("k must lie in [1, 10]");
  const std::vector<double> top = top_tridiagonal_eigenvalues(gaussian_tridiagonal(embed_n, rng), k);
  const double root_n = std::sqrt(static_cast<double>(embed_n));
  const double scale = std::pow(static_cast<double>(embed_n), 2.0 / 3.0);
  std::vector<double> out;
  for (double lambda : top) out.push_back(scale * (lambda / root_n - 2.0));
  return out;
}

KsResult tw1_ks_test(const std::vector<double>& graph_samples,
                     const std::vector<double>& reference, double threshold) {
  if (graph_samples.size() < 100 || reference.size() < 100)
    throw ParameterError("KS test needs at least 100 samples on each side");
  KsResult r;
  r.distance = ks_distance(graph_samples, reference);
  r.p_value = ks_p_value(r.distance, graph_samples.size(), reference.size());
  r.threshold = threshold;
  r.pass = r.distance <= threshold;
  return r;
}

// ----- switching identities ----------------------------------------------------

SwitchingMoment switching_moment_identity(const SpectralDecomposition& sd, const RegularGraph& g,
                                          int s, int t) {
  if (g.n() != sd.n) throw ParameterError("graph and decomposition sizes differ");
  if (s < 1 || t < 1 || s > sd.n || t > sd.n) throw ParameterError("index out of range");
  const Eigen::VectorXd us = column_for(sd, s), ut = column_for(sd, t);
  const double inv = 1.0 / std::sqrt(g.d() - 1.0);
  double sum = 0.0;
  for (Vertex b = 0; b < g.n(); ++b)
    for (Vertex c : g.neighbors(b)) sum += (us(c) - us(b) * inv) * (ut(c) - ut(b) * inv);
  SwitchingMoment m;
  m.value = sum / g.d();
  const int d = g.d();
  m.predicted = s == t ? (d * d - 2.0 * (d - 1) * eigenvalue_for(sd, s)) / (d * (d - 1.0)) : 0.0;
  m.perron = s == 1 || t == 1;
  return m;
}

ExcludedMoment switching_moment_excluded(const SpectralDecomposition& sd, const RegularGraph& g,
                                         int s, int t, Vertex center, int ell, double constant) {
  if (center < 0 || center >= g.n()) throw ParameterError("center out of range");
  if (ell < 0) throw ParameterError("ell must be nonnegative");
  const Eigen::VectorXd us = column_for(sd, s), ut = column_for(sd, t);
  std::vector<char> inside(g.n(), 0);
  for (Vertex v : ball(g, center, ell).vertices) inside[v] = 1;
  const double inv = 1.0 / std::sqrt(g.d() - 1.0);
  double sum = 0.0;
  long long count = 0;
  for (Vertex b = 0; b < g.n(); ++b) {
    if (inside[b]) continue;
    for (Vertex c : g.neighbors(b)) {
      if (inside[c]) continue;
      sum += (us(c) - us(b) * inv) * (ut(c) - ut(b) * inv);
      ++count;
    }
  }
  if (count == 0) throw DataError("no directed edges outside the ball");
  ExcludedMoment m;
  m.full = switching_moment_identity(sd, g, s, t).value;
  m.excluded = static_cast<double>(g.n()) * sum / static_cast<double>(count);
  m.difference = std::abs(m.excluded - m.full);
  m.bound = constant * std::pow(g.d() - 1.0, ell) / g.n();
  return m;
}

double switching_mean_identity(const SpectralDecomposition& sd, const RegularGraph& g, int s) {
  if (g.n() != sd.n) throw ParameterError("graph and decomposition sizes differ");
  Eigen::VectorXd u = column_for(sd, s);
  // Sign fixed by a nonnegative coordinate sum.
  if (u.sum() < 0.0) u = -u;
  const double inv = 1.0 / std::sqrt(g.d() - 1.0);
  double sum = 0.0;
  for (Vertex b = 0; b < g.n(); ++b)
    for (Vertex c : g.neighbors(b)) sum += u(c) - u(b) * inv;
  return std::sqrt(static_cast<double>(g.n())) * sum / (static_cast<double>(g.n()) * g.d());
}

// ----- eigenvector statistics --------------------------------------------------

WaveCovarianceEstimate wave_covariance_estimate(const std::vector<EnsembleSample>& ensemble,
                                                int s, int radius) {
  if (ensemble.size() < 100) throw ParameterError("wave covariance needs at least 100 samples");
  if (radius < 0) throw ParameterError("radius must be nonnegative");
  const int d = ensemble.front().d;
  WaveCovarianceEstimate est;
  est.s = s;
  est.d = d;
  est.radius = radius;
  est.lambda = 2.0 * std::sqrt(d - 1.0);
  const TreeBall shape = regular_tree_ball(d, radius);
  const int size = shape.size();
  est.target = wave_covariance(d, est.lambda, shape).matrix;
  for (int k = 0; k <= radius; ++k) est.depth_target.push_back(wave_covariance_entry(d, est.lambda, k));

  std::vector<std::vector<double>> depth_samples(radius + 1);
  std::vector<double> fourth_samples;
  Eigen::MatrixXd matrix_sum = Eigen::MatrixXd::Zero(size, size);
  int tree_samples = 0;
  for (const EnsembleSample& e : ensemble) {
    if (e.d != d) throw ParameterError("ensemble mixes degrees");
    if (s < 2 || s > e.max_index()) throw ParameterError("spectral index not stored");
    if (e.near_degenerate(s)) {
      ++est.samples_degenerate;
      continue;
    }
    if (e.wave_restrictions.empty()) throw DataError("sample has no wave restrictions");
    std::vector<double> depth_acc(radius + 1, 0.0);
    std::vector<int> depth_centers(radius + 1, 0);
    Eigen::MatrixXd matrix_acc = Eigen::MatrixXd::Zero(size, size);
    int used = 0;
    for (const WaveRestriction& w : e.wave_restrictions) {
      if (w.ball.radius < radius) throw ParameterError("stored restriction radius too small");
      const std::vector<double>& v = w.values[s - 2];
      std::vector<double> class_sum(radius + 1, 0.0);
      std::vector<int> class_count(radius + 1, 0);
      for (int p = 0; p < w.ball.size() && w.ball.depth[p] <= radius; ++p) {
        class_sum[w.ball.depth[p]] += v[0] * v[p];
        ++class_count[w.ball.depth[p]];
      }
      for (int k = 0; k <= radius; ++k) {
        if (class_count[k] == 0) continue;
        depth_acc[k] += class_sum[k] / class_count[k];
        ++depth_centers[k];
      }
      int prefix = 0;
      if (!prefix_is_tree(w.ball, radius, prefix)) {
        ++est.centers_excluded;
        continue;
      }
      const Eigen::Map<const Eigen::VectorXd> x(v.data(), size);
      matrix_acc += x * x.transpose();
      ++used;
      ++est.centers_used;
    }
    ++est.samples_used;
    for (int k = 0; k <= radius; ++k)
      if (depth_centers[k] > 0) depth_samples[k].push_back(depth_acc[k] / depth_centers[k]);
    fourth_samples.push_back(e.fourth_moments.at(s - 2));
    if (used == 0) continue;
    ++tree_samples;
    matrix_sum += matrix_acc / used;
  }
  const long long centers_total = est.centers_used + est.centers_excluded;
  if (2 * est.centers_excluded > centers_total)
    throw DataError("more than half of the centers have non-tree balls");
  if (tree_samples < 2) throw DataError("too few usable samples");

  for (int k = 0; k <= radius; ++k) {
    est.depth_mean.push_back(mean(depth_samples[k]));
    est.depth_standard_error.push_back(standard_error(depth_samples[k]));
  }
  est.fourth_moment = mean(fourth_samples);
  est.fourth_moment_standard_error = standard_error(fourth_samples);
  est.empirical = matrix_sum / tree_samples;
  est.max_abs_deviation = (est.empirical - est.target).cwiseAbs().maxCoeff();
  return est;
}

std::string depth_classes_csv(const WaveCovarianceEstimate& est) {
  std::ostringstream out = csv_stream();
  out << "depth,mean,standard_error,target\n";
  for (std::size_t k = 0; k < est.depth_mean.size(); ++k)
    out << k << ',' << est.depth_mean[k] << ',' << est.depth_standard_error[k] << ','
        << est.depth_target[k] << '\n';
  return out.str();
}

IndependenceResult independence_test(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ParameterError("paired samples differ in length");
  if (x.size() < 200) throw ParameterError("independence test needs at least 200 pairs");
  IndependenceResult r;
  r.samples = static_cast<int>(x.size());
  r.correlation = pearson_correlation(x, y);
  r.threshold = 3.0 / std::sqrt(static_cast<double>(r.samples)) + 0.05;
  r.pass = std::abs(r.correlation) <= r.threshold;
  return r;
}

IndependenceResult independence_test(const std::vector<EnsembleSample>& ensemble, int s) {
  std::vector<double> x, y;
  for (const EnsembleSample& e : ensemble) {
    if (s < 2 || s > e.max_index()) throw ParameterError("spectral index not stored");
    if (e.near_degenerate(s)) continue;
    for (const WaveRestriction& w : e.wave_restrictions) {
      if (!w.ball.is_tree) continue;
      x.push_back(e.rescaled(s));
      y.push_back(w.values[s - 2][0] * w.values[s - 2][0]);
      break;
    }
  }
  return independence_test(x, y);
}

// ----- spectral statistics -------------------------------------------------------

RigidityReport rigidity_report(const Eigen::VectorXd& eigenvalues, int d) {
  const int n = static_cast<int>(eigenvalues.size());
  if (n < 2) throw ParameterError("rigidity needs at least two eigenvalues");
  const std::vector<double> gamma = classical_locations(n, d);
  RigidityReport r;
  const double scale = std::pow(static_cast<double>(n), 2.0 / 3.0);
  for (int i = 2; i <= n; ++i) {
    const double stat = std::abs(eigenvalues(i - 1) - gamma[i - 2]) * scale *
                        std::cbrt(static_cast<double>(std::min(i, n - i + 1)));
    if (stat > r.max_statistic) {
      r.max_statistic = stat;
      r.argmax = i;
    }
  }
  r.bound = std::pow(static_cast<double>(n), 0.15);
  r.pass = r.max_statistic <= r.bound;
  return r;
}

double counting_functional(const Eigen::VectorXd& eigenvalues, int d, double exponent) {
  if (!(exponent > 0.0)) throw ParameterError("counting exponent must be positive");
  const int n = static_cast<int>(eigenvalues.size());
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = edge_rescale(eigenvalues(i), n, d);
  std::sort(x.rbegin(), x.rend());
  // Where the count is constant the weight increases with x, so the sup sits
  // at x = 0 or at a point x_i <= 0 carrying the count of all points >= x_i.
  double best = static_cast<double>(
      std::count_if(x.begin(), x.end(), [](double v) { return v >= 0.0; }));
  for (int i = 0; i < n; ++i) {
    if (x[i] > 0.0) continue;
    int last = i;
    while (last + 1 < n && x[last + 1] == x[i]) ++last;
    best = std::max(best, (last + 1) * std::pow(1.0 + std::abs(x[i]), -exponent));
    i = last;
  }
  return best;
}

LocalLawScan local_law_scan(const Eigen::VectorXd& eigenvalues, int d,
                            const LocalLawOptions& options) {
  const double n = static_cast<double>(eigenvalues.size());
  if (options.kappa_points < 2 || options.eta_points < 2)
    throw ParameterError("grid needs at least two points per axis");
  const double reach = std::pow(n, -options.g_exponent);
  const double eta_min = std::pow(n, -1.0 + options.g_exponent), eta_max = 0.5 * reach;
  if (eta_min >= eta_max) throw ParameterError("empty eta range for this n and exponent");
  LocalLawScan scan;
  for (int a = 0; a < options.kappa_points; ++a) {
    const double kappa = -0.5 * reach + reach * a / (options.kappa_points - 1);
    for (int b = 0; b < options.eta_points; ++b) {
      const double eta =
          eta_min * std::pow(eta_max / eta_min, static_cast<double>(b) / (options.eta_points - 1));
      const HalfPlanePoint z(2.0 + kappa, eta);
      LocalLawRow row{kappa, eta, std::abs(stieltjes_empirical(eigenvalues, z) - m_d(z, d)), 0.0};
      row.scaled = row.deviation * n * eta;
      scan.max_scaled = std::max(scan.max_scaled, row.scaled);
      scan.rows.push_back(row);
    }
  }
  return scan;
}

std::string to_csv(const LocalLawScan& scan) {
  std::ostringstream out = csv_stream();
  out << "kappa,eta,deviation,scaled\n";
  for (const LocalLawRow& r : scan.rows)
    out << r.kappa << ',' << r.eta << ',' << r.deviation << ',' << r.scaled << '\n';
  return out.str();
}

// ----- test functions and smoothing ----------------------------------------------

TestFunction smooth_bump(double lo, double hi) {
  if (!(lo < hi)) throw ParameterError("bump needs lo < hi");
  const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
  TestFunction t;
  t.lo = lo;
  t.hi = hi;
  auto base = [c, h](double x, double& tt, double& q) {
    tt = (x - c) / h;
    q = 1.0 - tt * tt;
    return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
  };
  t.f = [base](double x) {
    double tt, q;
    return base(x, tt, q);
  };
  t.df = [base, h](double x) {
    double tt, q;
    const double f = base(x, tt, q);
    return f == 0.0 ? 0.0 : f * (-2.0 * tt / (q * q)) / h;
  };
  t.d2f = [base, h](double x) {
    double tt, q;
    const double f = base(x, tt, q);
    if (f == 0.0) return 0.0;
    const double q2 = q * q;
    return f * (4.0 * tt * tt / (q2 * q2) - 2.0 / q2 - 8.0 * tt * tt / (q2 * q)) / (h * h);
  };
  return t;
}

TestFunction polynomial_bump(double center, double half_width) {
  if (!(half_width > 0.0)) throw ParameterError("half width must be positive");
  TestFunction t;
  t.lo = center - half_width;
  t.hi = center + half_width;
  const double c = center, h = half_width;
  t.f = [c, h](double x) {
    const double tt = (x - c) / h, q = 1.0 - tt * tt;
    return q > 0.0 ? q * q * q : 0.0;
  };
  t.df = [c, h](double x) {
    const double tt = (x - c) / h, q = 1.0 - tt * tt;
    return q > 0.0 ? -6.0 * tt * q * q / h : 0.0;
  };
  t.d2f = [c, h](double x) {
    const double tt = (x - c) / h, q = 1.0 - tt * tt;
    return q > 0.0 ? (-6.0 * q * q + 24.0 * tt * tt * q) / (h * h) : 0.0;
  };
  return t;
}

TestFunction zero_function(double lo, double hi) {
  TestFunction t;
  t.lo = lo;
  t.hi = hi;
  t.f = t.df = t.d2f = [](double) { return 0.0; };
  return t;
}

namespace {

double smoothing_discrepancy(const std::vector<double>& atoms, const std::vector<double>& weights,
                             const TestFunction& f, const std::function<double(double)>& density) {
  double direct = 0.0, scale = 0.0;
  for (std::size_t s = 0; s < atoms.size(); ++s) {
    if (atoms[s] >= f.lo && atoms[s] <= f.hi) direct += weights[s] * f.f(atoms[s]);
    scale += std::abs(weights[s]);
  }
  const AdaptiveSimpson rule(1e-11 * std::max(1.0, scale), 40);
  const double smoothed =
      integrate_pieces(rule, [&](double x) { return density(x) * f.f(x); }, f.lo, f.hi, atoms);
  return std::abs(direct - smoothed);
}

}  // namespace

double poisson_smoothing_discrepancy(const std::vector<double>& atoms,
                                     const std::vector<double>& weights, const TestFunction& f,
                                     double y) {
  if (atoms.size() != weights.size()) throw ParameterError("atoms and weights differ in length");
  if (!(y > 0.0)) throw DomainError("smoothing scale must be positive");
  auto density = [&](double x) {
    double sum = 0.0;
    for (std::size_t s = 0; s < atoms.size(); ++s) {
      const double dx = atoms[s] - x;
      sum += weights[s] * y / (dx * dx + y * y);
    }
    return sum / std::numbers::pi;
  };
  return smoothing_discrepancy(atoms, weights, f, density);
}

double poisson_smoothing_discrepancy(const SpectralDecomposition& sd, int i, int j,
                                     const TestFunction& f, double y) {
  if (!sd.is_full() || sd.eigenvectors.cols() != sd.n)
    throw ParameterError("smoothing needs a full decomposition with eigenvectors");
  if (!(y > 0.0)) throw DomainError("smoothing scale must be positive");
  std::vector<double> atoms(sd.n), weights(sd.n);
  for (int s = 0; s < sd.n; ++s) {
    atoms[s] = edge_rescale(sd.eigenvalues(s), sd.n, sd.d);
    weights[s] = sd.n * sd.eigenvectors(i, s) * sd.eigenvectors(j, s);
  }
  auto density = [&](double x) {
    return rescaled_im_green(sd, i, j, HalfPlanePoint(x, y)) / std::numbers::pi;
  };
  return smoothing_discrepancy(atoms, weights, f, density);
}

SmoothingStudy poisson_smoothing_check(const SpectralDecomposition& sd, int i, int j,
                                       const TestFunction& f, const std::vector<double>& ys) {
  if (ys.size() < 2) throw ParameterError("slope fit needs at least two scales");
  SmoothingStudy study;
  study.ys = ys;
  for (double y : ys) study.discrepancies.push_back(poisson_smoothing_discrepancy(sd, i, j, f, y));
  study.slope = loglog_slope(study.ys, study.discrepancies);
  return study;
}

HsDecomposition hs_decomposition_check(const Eigen::VectorXd& eigenvalues, int d,
                                       const TestFunction& f, double eta, double gamma) {
  if (!(gamma > 0.0) || !(eta > 0.0) || !(eta < gamma))
    throw ParameterError("need 0 < eta < gamma");
  const double slack = 1e-12;
  if (f.lo < 2.0 - gamma - slack || f.hi > 2.0 + gamma + slack)
    throw ParameterError("test function must be supported in [2 - gamma, 2 + gamma]");
  const int n = static_cast<int>(eigenvalues.size());
  const double big_n = n;

  HsDecomposition out;
  double sum_f = 0.0;
  std::vector<double> breaks;
  for (int i = 0; i < n; ++i) {
    const double x = eigenvalues(i);
    if (x >= f.lo && x <= f.hi) {
      sum_f += f.f(x);
      breaks.push_back(x);
    }
  }
  const AdaptiveSimpson fine(1e-13, 40);
  // Substitution x = 2 - t^2 removes the square-root edge of rho_d.
  const double a = std::max(f.lo, -2.0), b = std::min(f.hi, 2.0);
  double mass = 0.0;
  if (a < b)
    mass = fine([&](double t) { return f.f(2.0 - t * t) * rho_d(2.0 - t * t, d) * 2.0 * t; },
                std::sqrt(2.0 - b), std::sqrt(2.0 - a));
  out.lhs = std::abs(sum_f - big_n * mass);

  const Cutoff chi{gamma};
  auto delta = [&](double x, double y) {
    const HalfPlanePoint z(x, y);
    return stieltjes_empirical(eigenvalues, z) - m_d(z, d);
  };
  // x pieces end at the eigenvalues inside the support. Small-y integrals
  // run in t = log y, where the transition of y / ((lambda - x)^2 + y^2) at
  // y ~ |lambda - x| has unit width.
  std::vector<double> cuts = breaks;
  cuts.push_back(f.lo);
  cuts.push_back(f.hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const double tol = 1e-2;

  out.term1 = big_n * tensor_integral(
                          [&](double x, double y) {
                            const double w = (std::abs(f.f(x)) + y * std::abs(f.df(x))) *
                                             std::abs(chi.derivative(y));
                            return w == 0.0 ? 0.0 : w * std::abs(delta(x, y));
                          },
                          cuts, gamma, 2.0 * gamma, false, 1, 1, tol);
  // y |Im(m_N - m_d)| <= 1 + y Im m_d, so [0, 1e-12 eta] adds at most
  // about 1e-12 eta |f''|_1.
  out.term2 = big_n * tensor_integral(
                          [&](double x, double y) {
                            const double w = std::abs(f.d2f(x)) * y * chi.value(y);
                            return w == 0.0 ? 0.0 : w * std::abs(delta(x, y).imag());
                          },
                          cuts, 1e-12 * eta, eta, true, 1, 8, tol);
  out.term3 = big_n * tensor_integral(
                          [&](double x, double y) {
                            const double w =
                                std::abs(f.df(x)) * std::abs(chi.value(y) + y * chi.derivative(y));
                            return w == 0.0 ? 0.0 : w * std::abs(delta(x, y));
                          },
                          cuts, eta, 2.0 * gamma, true, 1, 2, tol);
  out.term4 = big_n * tensor_integral(
                          [&](double x, double) {
                            const double w = eta * std::abs(f.df(x));
                            return w == 0.0 ? 0.0 : w * std::abs(delta(x, eta));
                          },
                          cuts, 0.0, 1.0, false, 1, 1, tol);
  const double total = out.term1 + out.term2 + out.term3 + out.term4;
  out.ratio = total > 0.0 ? out.lhs / total : 0.0;
  return out;
}

// ----- exchangeability -------------------------------------------------------------

ExchangeabilityResult exchangeability_chisq(int n_small, int d, int ell, int big_r,
                                            long long trials, Rng& rng,
                                            const GraphSampler& sampler) {
  if (n_small > 8) throw ParameterError("exchangeability check needs n <= 8");
  if (trials < 1) throw ParameterError("trials must be positive");
  const SmallGraphCatalogue catalogue(n_small, d);
  const GraphSampler draw =
      sampler ? sampler : [n_small, d](Rng& r) { return sample_regular_graph(n_small, d, r); };
  ExchangeabilityResult out;
  out.counts.assign(catalogue.class_count(), 0);
  out.pair_counts.assign(catalogue.class_count(),
                         std::vector<long long>(catalogue.class_count(), 0));
  std::uniform_int_distribution<Vertex> pick(0, n_small - 1);
  for (long long trial = 0; trial < trials; ++trial) {
    const RegularGraph g = draw(rng);
    const Vertex center = pick(rng);
    RegularGraph result = g;
    try {
      const ResamplingData data = sample_resampling_data(g, center, ell, big_r, rng);
      if (!data.admissible.empty()) {
        result = apply_switchings(g, data);
        ++out.switched_trials;
      }
    } catch (const SamplingError&) {
      // No edge avoids the ball: the resampling is the identity.
    }
    const int after = catalogue.class_of(result);
    ++out.counts[after];
    ++out.pair_counts[catalogue.class_of(g)][after];
  }
  for (int c = 0; c < catalogue.class_count(); ++c)
    out.probabilities.push_back(catalogue.class_probability(c));
  out.chi_square = chi_square_test(out.counts, out.probabilities);
  out.symmetry = symmetry_test(out.pair_counts);
  return out;
}

// ----- Wigner baseline -------------------------------------------------------------

WignerSample wigner_reference_mode(int n, int k, Rng& rng, int coordinates) {
  if (n < 2 || n > 4096) throw ParameterError("Wigner size must lie in [2, 4096]");
  if (k < 1 || k >= n) throw ParameterError("k must lie in [1, n-1]");
  if (coordinates < 1 || 2 * coordinates > n) throw ParameterError("too many coordinates");
  std::normal_distribution<double> normal;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd w(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) w(i, j) = normal(rng) * scale;
  const MatVec apply = [&w](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    y.noalias() = w.selfadjointView<Eigen::Lower>() * x;
  };
  LanczosOptions options;
  options.seed = rng();
  const LanczosResult r = lanczos_extreme(apply, n, k, SpectrumSide::kTop, Eigen::MatrixXd(n, 0), options);

  WignerSample out;
  const double edge = std::pow(static_cast<double>(n), 2.0 / 3.0);
  for (int c = 0; c < k; ++c) out.rescaled.push_back(edge * (r.values(c) - 2.0));
  const Eigen::VectorXd u = r.vectors.col(0);
  for (int i = 0; i < coordinates; ++i) {
    out.diagonal_overlaps.push_back(n * u(i) * u(i));
    out.offdiagonal_overlaps.push_back(n * u(2 * i) * u(2 * i + 1));
  }
  return out;
}

}  // namespace regwave
