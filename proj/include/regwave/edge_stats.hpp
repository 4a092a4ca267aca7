#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "regwave/graph.hpp"
#include "regwave/random.hpp"
#include "regwave/spectral.hpp"
#include "regwave/stats.hpp"

namespace regwave {

// Eigenvalues closer than this are treated as degenerate for eigenvector
// statistics.
constexpr double kDegeneracyGap = 1e-10;

// sqrt(N) u_s restricted to a ball around one center, positions in BFS
// order. values[c][p] belongs to spectral index s = 2 + c.
struct WaveRestriction {
  TreeBall ball;
  std::vector<std::vector<double>> values;
};

// One graph of an ensemble: lambda_2 .. lambda_{k+1} (descending), their
// edge rescalings, and eigenvector restrictions around sampled centers.
struct EnsembleSample {
  std::uint64_t seed = 0;
  int n = 0;
  int d = 0;
  std::vector<double> eigenvalues;
  std::vector<double> rescaled_eigenvalues;
  std::vector<WaveRestriction> wave_restrictions;
  // fourth_moments[c]: mean over all vertices x of (N u_{2+c}(x)^2)^2.
  std::vector<double> fourth_moments;

  // Highest stored spectral index.
  int max_index() const { return static_cast<int>(eigenvalues.size()) + 1; }
  double eigenvalue(int s) const { return eigenvalues.at(s - 2); }
  double rescaled(int s) const { return rescaled_eigenvalues.at(s - 2); }
  // lambda_s within kDegeneracyGap of a stored neighbor.
  bool near_degenerate(int s) const;
};

enum class SpectralMethod { kDense, kLanczos };

struct EnsembleOptions {
  int n = 1000;
  int d = 3;
  int k = 5;         // eigenpairs beyond the Perron pair
  int radius = 2;    // wave restriction radius
  int centers = 16;  // distinct uniformly drawn centers per graph
  SpectralMethod method = SpectralMethod::kLanczos;
};

EnsembleSample generate_ensemble_sample(const EnsembleOptions& options, std::uint64_t seed);
// Sample i uses seed derive_seed(master_seed, i); output order is by i.
std::vector<EnsembleSample> generate_ensemble(const EnsembleOptions& options,
                                              std::uint64_t master_seed, int count, int workers);
// Rows: seed, s, lambda, rescaled.
std::string ensemble_csv(const std::vector<EnsembleSample>& samples);

// ----- reports ----------------------------------------------------------

enum class Gate { kReport, kAtMost, kAtLeast, kWithin };

// kAtMost: value <= bound. kAtLeast: value >= bound. kWithin:
// |value - target| <= bound. kReport always passes.
struct Metric {
  std::string name;
  double value = 0.0;
  Gate gate = Gate::kReport;
  double bound = 0.0;
  double target = 0.0;

  bool passed() const;
};

struct ExperimentReport {
  std::string name;
  std::vector<Metric> metrics;
  long long sample_count = 0;
  double runtime_seconds = 0.0;
  std::string config_hash;
  nlohmann::json details = nlohmann::json::object();

  bool passed() const;
  const Metric& metric(const std::string& name) const;
};

nlohmann::json to_json(const Metric& m);
nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);

// ----- edge reference samplers --------------------------------------------

// Tridiagonal model of the beta = 1 Gaussian ensemble: diagonal N(0, 2),
// off-diagonal chi_{n-1}, ..., chi_1. Its spectrum matches a GOE matrix
// with off-diagonal variance 1, edge at 2 sqrt(n).
struct Tridiagonal {
  std::vector<double> diagonal;
  std::vector<double> off_diagonal;
};
Tridiagonal gaussian_tridiagonal(int n, Rng& rng);
// Largest k eigenvalues, descending (LAPACK bisection).
std::vector<double> top_tridiagonal_eigenvalues(const Tridiagonal& t, int k);

// Top k points n^{2/3}(mu_i - 2), mu = lambda / sqrt(n), of the tridiagonal
// model at size embed_n. Requires embed_n >= 200 and 1 <= k <= 10.
std::vector<double> airy1_reference(int k, int embed_n, Rng& rng);

struct KsResult {
  double distance = 0.0;
  double p_value = 1.0;
  double threshold = 0.0;
  bool pass = false;
};
// Two-sample KS distance; passes iff distance <= threshold. Each sample
// needs at least 100 points.
KsResult tw1_ks_test(const std::vector<double>& graph_samples,
                     const std::vector<double>& reference, double threshold = 0.15);

// ----- switching identities -------------------------------------------------

struct SwitchingMoment {
  double value = 0.0;      // exact directed-edge average
  double predicted = 0.0;  // (d^2 - 2(d-1) lambda_s) / (d(d-1)) delta_st
  bool perron = false;     // s or t is the Perron index
  double residual() const { return std::abs(value - predicted); }
};

// Average over all N d directed edges (b, c) of
// N (u_s(c) - u_s(b)/sqrt(d-1)) (u_t(c) - u_t(b)/sqrt(d-1)).
SwitchingMoment switching_moment_identity(const SpectralDecomposition& sd, const RegularGraph& g,
                                          int s, int t);

// Same average restricted to directed edges with both endpoints outside the
// radius-ell ball around `center`, compared with the full average.
struct ExcludedMoment {
  double full = 0.0;
  double excluded = 0.0;
  double difference = 0.0;
  double bound = 0.0;  // constant (d-1)^ell / n
  bool within() const { return difference <= bound; }
};
ExcludedMoment switching_moment_excluded(const SpectralDecomposition& sd, const RegularGraph& g,
                                         int s, int t, Vertex center, int ell,
                                         double constant = 50.0);

// Average over directed edges of sqrt(N)(u_s(c) - u_s(b)/sqrt(d-1)):
// zero for s >= 2, 1 - 1/sqrt(d-1) for the Perron vector.
double switching_mean_identity(const SpectralDecomposition& sd, const RegularGraph& g, int s);

// ----- eigenvector statistics ---------------------------------------------

struct WaveCovarianceEstimate {
  int s = 2;
  int d = 3;
  int radius = 0;
  double lambda = 0.0;  // 2 sqrt(d-1)
  int samples_used = 0;
  int samples_degenerate = 0;
  long long centers_used = 0;
  long long centers_excluded = 0;
  // Class k: pairs (o, v) with v at graph distance k from a sampled center
  // o. Means of N u_s(o) u_s(v) over every sampled center, with standard
  // errors over per-graph averages, and the wave covariance.
  std::vector<double> depth_mean;
  std::vector<double> depth_standard_error;
  std::vector<double> depth_target;
  double fourth_moment = 0.0;  // mean of (N u_s(o)^2)^2 over uniform o
  double fourth_moment_standard_error = 0.0;
  Eigen::MatrixXd empirical;   // mean N u_s(i) u_s(j) over tree-ball positions
  Eigen::MatrixXd target;
  double max_abs_deviation = 0.0;
};

// Requires >= 100 samples sharing d, radius <= stored radius and s stored.
// Near-degenerate samples are excluded. Centers whose radius ball is not a
// tree are excluded from the matrix; more than half of the centers excluded
// raises DataError.
WaveCovarianceEstimate wave_covariance_estimate(const std::vector<EnsembleSample>& ensemble,
                                                int s, int radius);
// Rows: depth, mean, standard_error, target.
std::string depth_classes_csv(const WaveCovarianceEstimate& est);

struct IndependenceResult {
  double correlation = 0.0;
  double threshold = 0.0;  // 3/sqrt(M) + 0.05
  int samples = 0;
  bool pass = false;
};
// Pearson correlation of paired data; requires >= 200 pairs.
IndependenceResult independence_test(const std::vector<double>& x, const std::vector<double>& y);
// x = rescaled lambda_s, y = N u_s(o)^2 at the first tree center.
IndependenceResult independence_test(const std::vector<EnsembleSample>& ensemble, int s);

// ----- spectral statistics --------------------------------------------------

struct RigidityReport {
  double max_statistic = 0.0;  // max_i |lambda_i - gamma_i| N^{2/3} min(i, N-i+1)^{1/3}
  int argmax = 0;              // 1-based index
  double bound = 0.0;          // N^{0.15}
  bool pass = false;
};
// `eigenvalues` is the full descending spectrum, Perron value first.
RigidityReport rigidity_report(const Eigen::VectorXd& eigenvalues, int d);

// sup_{x <= 0} (1 + |x|)^{-p} #{i : (A N)^{2/3}(lambda_i - 2) >= x} with
// N = eigenvalues.size(), evaluated exactly at the jump points. The edge
// count grows like |x|^{3/2}, so only p >= 3/2 gives a tight sequence.
constexpr double kCountingExponent = 1.5;
double counting_functional(const Eigen::VectorXd& eigenvalues, int d,
                           double exponent = kCountingExponent);

struct LocalLawOptions {
  double g_exponent = 0.1;  // |z - 2| <= n^{-g}, eta >= n^{-1+g}
  int kappa_points = 9;
  int eta_points = 8;
};
struct LocalLawRow {
  double kappa = 0.0;
  double eta = 0.0;
  double deviation = 0.0;  // |m_N - m_d| at z = 2 + kappa + i eta
  double scaled = 0.0;     // deviation N eta
};
struct LocalLawScan {
  std::vector<LocalLawRow> rows;
  double max_scaled = 0.0;
};
LocalLawScan local_law_scan(const Eigen::VectorXd& eigenvalues, int d,
                            const LocalLawOptions& options = {});
std::string to_csv(const LocalLawScan& scan);

// ----- test functions and smoothing ---------------------------------------

// f with first and second derivatives, zero outside [lo, hi].
struct TestFunction {
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> d2f;
  double lo = 0.0;
  double hi = 0.0;
};
// exp(-1/(1 - t^2)) with t the affine image of [lo, hi] onto [-1, 1].
TestFunction smooth_bump(double lo, double hi);
// (1 - t^2)^3 with t = (x - center)/half_width: twice differentiable.
TestFunction polynomial_bump(double center, double half_width);
TestFunction zero_function(double lo, double hi);

// |sum_s w_s f(x_s) - int u(x + iy) f(x) dx| for the measure sum_s w_s
// delta_{x_s} and its Poisson integral u.
double poisson_smoothing_discrepancy(const std::vector<double>& atoms,
                                     const std::vector<double>& weights, const TestFunction& f,
                                     double y);
// Same for mu_N = sum_s N u_s(i) u_s(j) delta at the edge-rescaled
// eigenvalues, with u evaluated through rescaled_im_green.
double poisson_smoothing_discrepancy(const SpectralDecomposition& sd, int i, int j,
                                     const TestFunction& f, double y);

struct SmoothingStudy {
  std::vector<double> ys;
  std::vector<double> discrepancies;
  double slope = 0.0;  // log-log slope of discrepancy against y
};
SmoothingStudy poisson_smoothing_check(const SpectralDecomposition& sd, int i, int j,
                                       const TestFunction& f,
                                       const std::vector<double>& ys = {0.4, 0.2, 0.1, 0.05});

// LHS = |sum_i f(lambda_i) - N int f rho_d| and the four terms of the
// almost-analytic extension bound built from |m_N - m_d|.
struct HsDecomposition {
  double lhs = 0.0;
  double term1 = 0.0;
  double term2 = 0.0;
  double term3 = 0.0;
  double term4 = 0.0;
  double ratio = 0.0;  // lhs / (term1 + term2 + term3 + term4), 0 if both vanish
};
// f must be supported in [2 - gamma, 2 + gamma] and 0 < eta < gamma.
HsDecomposition hs_decomposition_check(const Eigen::VectorXd& eigenvalues, int d,
                                       const TestFunction& f, double eta, double gamma);

// ----- exchangeability -----------------------------------------------------

using GraphSampler = std::function<RegularGraph(Rng&)>;

struct ExchangeabilityResult {
  ChiSquareResult chi_square;  // class law of T_S(G) against the uniform law
  ChiSquareResult symmetry;    // pair table (class G, class T_S(G)) is symmetric
  std::vector<long long> counts;
  std::vector<double> probabilities;
  std::vector<std::vector<long long>> pair_counts;
  long long switched_trials = 0;  // trials with a nonempty admissible set
};

// Draws G from `sampler` (uniform by default), a uniform center and
// resampling data, applies the switchings and tallies the isomorphism class
// of the result against the uniform class law, plus the joint class table
// of (G, T_S(G)). Requires n_small <= 8.
ExchangeabilityResult exchangeability_chisq(int n_small, int d, int ell, int big_r,
                                            long long trials, Rng& rng,
                                            const GraphSampler& sampler = {});

// ----- Wigner baseline -----------------------------------------------------

struct WignerSample {
  std::vector<double> rescaled;              // n^{2/3}(mu_i - 2), top k, descending
  std::vector<double> diagonal_overlaps;     // N u(i)^2, top eigenvector
  std::vector<double> offdiagonal_overlaps;  // N u(i) u(j), i != j
};
// Real symmetric matrix with unit-variance entries scaled by 1/sqrt(n).
// Overlaps use `coordinates` distinct coordinates and as many disjoint
// pairs. Requires n <= 4096.
WignerSample wigner_reference_mode(int n, int k, Rng& rng, int coordinates = 8);

}  // namespace regwave
