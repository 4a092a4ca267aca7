#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "regwave/edge_stats.hpp"
#include "regwave/errors.hpp"
#include "regwave/parallel.hpp"
#include "regwave/tree_green.hpp"

using namespace regwave;

namespace {

RegularGraph sample(int n, int d, std::uint64_t seed) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n) * 16 + d));
  return sample_regular_graph(n, d, rng);
}

// Dense H and its eigenpairs, independent of the library decomposition.
Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense_eigen(const RegularGraph& g) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(g.n(), g.n());
  for (const auto& [u, v] : g.edges()) h(u, v) = h(v, u) = 1.0 / std::sqrt(g.d() - 1.0);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h);
}

// Brute-force directed-edge second moment with eigenvectors from the library
// decomposition.
double moment_oracle(const SpectralDecomposition& sd, const RegularGraph& g, int s, int t) {
  const Eigen::VectorXd us = sd.eigenvectors.col(sd.column_of(s));
  const Eigen::VectorXd ut = sd.eigenvectors.col(sd.column_of(t));
  const double q = 1.0 / std::sqrt(g.d() - 1.0);
  double sum = 0.0;
  for (Vertex b = 0; b < g.n(); ++b)
    for (Vertex c : g.neighbors(b)) sum += g.n() * (us(c) - q * us(b)) * (ut(c) - q * ut(b));
  return sum / (static_cast<double>(g.n()) * g.d());
}

TestFunction indicator(double lo, double hi) {
  auto one = [](double) { return 1.0; };
  auto zero = [](double) { return 0.0; };
  return {one, zero, zero, lo, hi};
}

std::vector<double> gaussians(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> out(count);
  for (double& x : out) x = normal(rng);
  return out;
}

}  // namespace

// ----- tridiagonal edge reference -------------------------------------------

TEST_CASE("tridiagonal top eigenvalues match a dense solve") {
  Rng rng(3);
  const Tridiagonal t = gaussian_tridiagonal(60, rng);
  REQUIRE(t.diagonal.size() == 60);
  REQUIRE(t.off_diagonal.size() == 59);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(60, 60);
  for (int i = 0; i < 60; ++i) m(i, i) = t.diagonal[i];
  for (int i = 0; i < 59; ++i) m(i, i + 1) = m(i + 1, i) = t.off_diagonal[i];
  const Eigen::VectorXd all = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
  const std::vector<double> top = top_tridiagonal_eigenvalues(t, 5);
  REQUIRE(top.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(top[i] == doctest::Approx(all(59 - i)).epsilon(1e-10));
}

TEST_CASE("tridiagonal off-diagonal entries are positive chi variables") {
  Rng rng(5);
  const Tridiagonal t = gaussian_tridiagonal(400, rng);
  for (double b : t.off_diagonal) CHECK(b > 0.0);
  // E chi_k^2 = k, so the summed squares track n(n-1)/2.
  double sq = 0.0;
  for (double b : t.off_diagonal) sq += b * b;
  CHECK(sq == doctest::Approx(400.0 * 399.0 / 2.0).epsilon(0.02));
}

TEST_CASE("airy reference is deterministic, descending and validated") {
  Rng a(17), b(17);
  const std::vector<double> x = airy1_reference(4, 300, a);
  const std::vector<double> y = airy1_reference(4, 300, b);
  CHECK(x == y);
  CHECK(std::is_sorted(x.rbegin(), x.rend()));
  Rng c(1);
  CHECK_THROWS_AS(airy1_reference(1, 199, c), ParameterError);
  CHECK_THROWS_AS(airy1_reference(0, 300, c), ParameterError);
  CHECK_THROWS_AS(airy1_reference(11, 300, c), ParameterError);
}

TEST_CASE("airy reference top point has TW1 mean and variance" * doctest::description("slow")) {
  Rng rng(1);
  std::vector<double> top;
  for (int i = 0; i < 10000; ++i) top.push_back(airy1_reference(1, 2000, rng)[0]);
  // TW1 mean -1.2065 and variance 1.6078; the mean gate absorbs the finite-n bias.
  CHECK(std::abs(mean(top) + 1.2065) <= 0.1);
  CHECK(std::abs(sample_variance(top) - 1.6078) <= 0.15);
}

TEST_CASE("KS test trivial cases") {
  const std::vector<double> a = gaussians(200, 1);
  std::vector<double> shifted = a;
  for (double& x : shifted) x += 100.0;
  const KsResult self = tw1_ks_test(a, a);
  CHECK(self.distance == 0.0);
  CHECK(self.pass);
  const KsResult far = tw1_ks_test(a, shifted);
  CHECK(far.distance == 1.0);
  CHECK_FALSE(far.pass);
  CHECK(far.p_value < 1e-10);
  CHECK(tw1_ks_test(a, gaussians(200, 2)).pass);
  CHECK_THROWS_AS(tw1_ks_test(gaussians(99, 3), a), ParameterError);
  CHECK_THROWS_AS(tw1_ks_test(a, gaussians(99, 3)), ParameterError);
}

// ----- switching identities -------------------------------------------------

TEST_CASE("directed-edge second moment identity holds exactly") {
  for (int d : {3, 4, 5}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const RegularGraph g = sample(64 + 8 * static_cast<int>(seed), d, seed);
      const SpectralDecomposition sd = eigendecompose(g);
      for (int s = 1; s <= 5; ++s) {
        for (int t = 1; t <= 5; ++t) {
          const SwitchingMoment m = switching_moment_identity(sd, g, s, t);
          CHECK(std::abs(m.value - moment_oracle(sd, g, s, t)) < 1e-10);
          CHECK(m.residual() < 1e-10);
          CHECK(m.perron == (s == 1 || t == 1));
          if (s != t) CHECK(m.predicted == 0.0);
        }
      }
      // Perron pair: (1 - 1/sqrt(d-1))^2 from the constant vector.
      const double q = 1.0 - 1.0 / std::sqrt(d - 1.0);
      CHECK(switching_moment_identity(sd, g, 1, 1).value == doctest::Approx(q * q).epsilon(1e-12));
    }
  }
}

TEST_CASE("second moment prediction at the spectral edge equals 1/A") {
  // lambda_s = 2 gives (d^2 - 4(d-1))/(d(d-1)) = (d-2)^2/(d(d-1)).
  for (int d : {3, 4, 5, 7}) {
    const double predicted = (d * d - 2.0 * (d - 1) * 2.0) / (d * (d - 1.0));
    CHECK(predicted == doctest::Approx(1.0 / edge_constant(d)).epsilon(1e-14));
  }
}

TEST_CASE("directed-edge mean identity") {
  for (int d : {3, 4, 5}) {
    const RegularGraph g = sample(80, d, 9);
    const SpectralDecomposition sd = eigendecompose(g);
    CHECK(switching_mean_identity(sd, g, 1) ==
          doctest::Approx(1.0 - 1.0 / std::sqrt(d - 1.0)).epsilon(1e-12));
    for (int s = 2; s <= 10; ++s) CHECK(std::abs(switching_mean_identity(sd, g, s)) < 1e-10);
  }
}

TEST_CASE("excluded-edge moment stays within its bound") {
  for (int d : {3, 4, 5}) {
    const RegularGraph g = sample(300, d, 4);
    const SpectralDecomposition sd = eigendecompose(g);
    for (int ell : {0, 1, 2}) {
      const ExcludedMoment e = switching_moment_excluded(sd, g, 2, 2, 0, ell);
      CHECK(e.full == doctest::Approx(switching_moment_identity(sd, g, 2, 2).value).epsilon(1e-12));
      CHECK(e.difference == doctest::Approx(std::abs(e.full - e.excluded)).epsilon(1e-12));
      CHECK(e.bound == doctest::Approx(50.0 * std::pow(d - 1.0, ell) / 300.0).epsilon(1e-12));
      CHECK(e.within());
    }
  }
}

// ----- ensembles and eigenvector statistics ---------------------------------

TEST_CASE("ensemble generation is deterministic across worker counts") {
  EnsembleOptions o;
  o.n = 120;
  o.k = 3;
  o.centers = 5;
  const auto one = generate_ensemble(o, 21, 6, 1);
  const auto three = generate_ensemble(o, 21, 6, 3);
  REQUIRE(one.size() == 6);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].seed == derive_seed(21, i));
    CHECK(one[i].eigenvalues == three[i].eigenvalues);
    CHECK(one[i].fourth_moments == three[i].fourth_moments);
    REQUIRE(one[i].wave_restrictions.size() == 5);
    for (std::size_t c = 0; c < 5; ++c)
      CHECK(one[i].wave_restrictions[c].values == three[i].wave_restrictions[c].values);
  }
}

TEST_CASE("ensemble sample agrees between dense and Lanczos methods") {
  EnsembleOptions o;
  o.n = 200;
  o.k = 3;
  o.centers = 3;
  const EnsembleSample lanczos = generate_ensemble_sample(o, 8);
  o.method = SpectralMethod::kDense;
  const EnsembleSample dense = generate_ensemble_sample(o, 8);
  for (int s = 2; s <= 4; ++s) {
    CHECK(lanczos.eigenvalue(s) == doctest::Approx(dense.eigenvalue(s)).epsilon(1e-9));
    CHECK(lanczos.rescaled(s) ==
          doctest::Approx(edge_rescale(lanczos.eigenvalue(s), 200, 3)).epsilon(1e-12));
    CHECK(lanczos.fourth_moments[s - 2] ==
          doctest::Approx(dense.fourth_moments[s - 2]).epsilon(1e-6));
  }
  // Restrictions agree up to the eigenvector sign.
  for (int c = 0; c < 3; ++c) {
    const auto& a = lanczos.wave_restrictions[c].values[0];
    const auto& b = dense.wave_restrictions[c].values[0];
    for (std::size_t p = 0; p < a.size(); ++p)
      CHECK(std::abs(a[p]) == doctest::Approx(std::abs(b[p])).epsilon(1e-6));
  }
}

TEST_CASE("ensemble options are validated") {
  EnsembleOptions o;
  o.n = 50;
  o.centers = 51;
  CHECK_THROWS_AS(generate_ensemble_sample(o, 1), ParameterError);
  o.centers = 0;
  CHECK_THROWS_AS(generate_ensemble_sample(o, 1), ParameterError);
  o.centers = 4;
  o.k = 0;
  CHECK_THROWS_AS(generate_ensemble_sample(o, 1), ParameterError);
}

TEST_CASE("near-degenerate spectral indices") {
  EnsembleSample e;
  e.eigenvalues = {0.5, 0.5 + 1e-12, 0.3};
  CHECK(e.max_index() == 4);
  CHECK(e.near_degenerate(2));
  CHECK(e.near_degenerate(3));
  CHECK_FALSE(e.near_degenerate(4));
}

TEST_CASE("ensemble CSV layout") {
  EnsembleOptions o;
  o.n = 60;
  o.k = 2;
  o.centers = 2;
  const auto ens = generate_ensemble(o, 2, 3, 1);
  const std::string csv = ensemble_csv(ens);
  CHECK(csv.rfind("seed,s,lambda,rescaled\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 2);
}

TEST_CASE("wave covariance estimate matches a direct recomputation") {
  EnsembleOptions o;
  o.n = 300;
  o.k = 1;
  o.centers = 6;
  const auto ens = generate_ensemble(o, 31, 100, 1);
  const WaveCovarianceEstimate est = wave_covariance_estimate(ens, 2, 2);

  // Depth classes recomputed from the stored restrictions over every center,
  // by graph distance; the matrix uses only centers with tree balls.
  const TreeBall shape = regular_tree_ball(3, 2);
  REQUIRE(shape.size() == 10);
  std::vector<double> d0, d1, d2, fourth;
  long long excluded = 0;
  for (const EnsembleSample& e : ens) {
    double r0 = 0, r1 = 0, r2 = 0;
    int c2 = 0;
    // Unnormalized lambda_2: the eigen-equation sums u over the d neighbors.
    const double lambda = e.eigenvalue(2) * std::sqrt(2.0);
    for (const WaveRestriction& w : e.wave_restrictions) {
      const auto& v = w.values[0];
      double s1 = 0, s2 = 0;
      int n1 = 0, n2 = 0;
      for (int p = 0; p < w.ball.size(); ++p) {
        if (w.ball.depth[p] == 1) s1 += v[p], ++n1;
        if (w.ball.depth[p] == 2) s2 += v[p], ++n2;
      }
      REQUIRE(n1 == 3);
      CHECK(s1 == doctest::Approx(lambda * v[0]).epsilon(1e-7).scale(1.0));
      r0 += v[0] * v[0];
      r1 += v[0] * s1 / n1;
      if (n2 > 0) r2 += v[0] * s2 / n2, ++c2;
      if (!w.ball.is_tree) {
        ++excluded;
        continue;
      }
      CHECK(w.ball.depth == shape.depth);
    }
    const double centers = static_cast<double>(e.wave_restrictions.size());
    d0.push_back(r0 / centers);
    d1.push_back(r1 / centers);
    d2.push_back(r2 / c2);
    fourth.push_back(e.fourth_moments[0]);
  }
  CHECK(est.samples_used + est.samples_degenerate == 100);
  CHECK(est.centers_excluded == excluded);
  CHECK(est.depth_mean[0] == doctest::Approx(mean(d0)).epsilon(1e-12));
  CHECK(est.depth_mean[1] == doctest::Approx(mean(d1)).epsilon(1e-12));
  CHECK(est.depth_mean[2] == doctest::Approx(mean(d2)).epsilon(1e-12));
  CHECK(est.fourth_moment == doctest::Approx(mean(fourth)).epsilon(1e-12));
  CHECK(est.depth_standard_error[1] == doctest::Approx(standard_error(d1)).epsilon(1e-12));
  CHECK(est.depth_target[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.depth_target[1] == doctest::Approx(0.942809).epsilon(1e-6));
  CHECK(est.depth_target[2] == doctest::Approx(0.833333).epsilon(1e-6));
  CHECK(est.target.rows() == 10);
  CHECK(est.empirical.rows() == 10);
  const std::string csv = depth_classes_csv(est);
  CHECK(csv.rfind("depth,mean,standard_error,target\n", 0) == 0);
}

TEST_CASE("per-graph fourth moment is the vertex average of (N u^2)^2") {
  EnsembleOptions o;
  o.n = 150;
  o.k = 2;
  o.centers = 2;
  o.method = SpectralMethod::kDense;
  const EnsembleSample e = generate_ensemble_sample(o, 5);
  Rng rng(5);
  const RegularGraph g = sample_regular_graph(150, 3, rng);
  const auto eig = dense_eigen(g);
  for (int s = 2; s <= 3; ++s) {
    const Eigen::VectorXd u = eig.eigenvectors().col(150 - s) * std::sqrt(150.0);
    double acc = 0.0;
    for (int x = 0; x < 150; ++x) acc += std::pow(u(x), 4);
    CHECK(e.fourth_moments[s - 2] == doctest::Approx(acc / 150.0).epsilon(1e-8));
  }
}

TEST_CASE("wave covariance rejects small ensembles and mostly cyclic balls") {
  EnsembleOptions o;
  o.n = 100;
  o.k = 1;
  o.centers = 2;
  const auto few = generate_ensemble(o, 3, 20, 1);
  CHECK_THROWS_AS(wave_covariance_estimate(few, 2, 1), ParameterError);

  // Every radius-1 ball of K4 contains a triangle.
  EnsembleOptions k4;
  k4.n = 4;
  k4.k = 2;
  k4.radius = 1;
  k4.centers = 4;
  k4.method = SpectralMethod::kDense;
  const EnsembleSample e = generate_ensemble_sample(k4, 1);
  for (const WaveRestriction& w : e.wave_restrictions) CHECK_FALSE(w.ball.is_tree);
  EnsembleSample shifted = e;
  // Separate the degenerate K4 eigenvalues so the sample is not excluded.
  shifted.eigenvalues = {0.0, -1.0};
  const std::vector<EnsembleSample> ens(100, shifted);
  CHECK_THROWS_AS(wave_covariance_estimate(ens, 2, 1), DataError);
}

TEST_CASE("independence test on null and coupled data") {
  const std::vector<double> x = gaussians(500, 11);
  const std::vector<double> y = gaussians(500, 12);
  const IndependenceResult null = independence_test(x, y);
  CHECK(null.samples == 500);
  CHECK(null.threshold == doctest::Approx(3.0 / std::sqrt(500.0) + 0.05).epsilon(1e-14));
  CHECK(null.pass);
  std::vector<double> coupled = x;
  for (std::size_t i = 0; i < x.size(); ++i) coupled[i] += 0.5 * y[i];
  const IndependenceResult dep = independence_test(x, coupled);
  CHECK(dep.correlation == doctest::Approx(pearson_correlation(x, coupled)).epsilon(1e-14));
  CHECK_FALSE(dep.pass);
  CHECK_THROWS_AS(independence_test(gaussians(199, 1), gaussians(199, 2)), ParameterError);
  CHECK_THROWS_AS(independence_test(x, gaussians(499, 2)), ParameterError);
}

// ----- spectral statistics --------------------------------------------------

TEST_CASE("rigidity statistic vanishes at the classical locations") {
  const int n = 400;
  const std::vector<double> gamma = classical_locations(n, 3);
  Eigen::VectorXd ev(n);
  ev(0) = 3.0 / std::sqrt(2.0);
  for (int i = 2; i <= n; ++i) ev(i - 1) = gamma[i - 2];
  const RigidityReport r = rigidity_report(ev, 3);
  CHECK(r.max_statistic == 0.0);
  CHECK(r.bound == doctest::Approx(std::pow(400.0, 0.15)).epsilon(1e-14));
  CHECK(r.pass);

  // One displaced eigenvalue sets the maximum through its own weight.
  ev(99) += 1e-3;
  const RigidityReport moved = rigidity_report(ev, 3);
  CHECK(moved.argmax == 100);
  CHECK(moved.max_statistic ==
        doctest::Approx(1e-3 * std::pow(400.0, 2.0 / 3.0) * std::cbrt(100.0)).epsilon(1e-9));
}

TEST_CASE("rigidity statistic on a sampled graph") {
  const RegularGraph g = sample(500, 3, 6);
  const RigidityReport r = rigidity_report(eigenvalues_only(g).eigenvalues, 3);
  CHECK(std::isfinite(r.max_statistic));
  CHECK(r.argmax >= 2);
  CHECK(r.argmax <= 500);
  CHECK(r.pass == (r.max_statistic <= r.bound));
}

TEST_CASE("counting functional on hand-built spectra") {
  const int n = 4, d = 3;
  const double scale = std::pow(edge_constant(d) * n, 2.0 / 3.0);
  auto spectrum = [&](std::vector<double> xs) {
    Eigen::VectorXd ev(n);
    for (int i = 0; i < n; ++i) ev(i) = 2.0 + xs[i] / scale;
    return ev;
  };
  // Points 1, 0, -1, -7 at p = 2/3: count 2 at x = 0 beats 3 / 2^{2/3} and 4 / 8^{2/3}.
  CHECK(counting_functional(spectrum({1.0, 0.0, -1.0, -7.0}), d, 2.0 / 3.0) ==
        doctest::Approx(2.0).epsilon(1e-12));
  // Triple at -1: 3 / 2^{2/3} beats 4 / 4^{2/3}.
  CHECK(counting_functional(spectrum({-1.0, -1.0, -1.0, -3.0}), d, 2.0 / 3.0) ==
        doctest::Approx(3.0 * std::pow(2.0, -2.0 / 3.0)).epsilon(1e-9));
  // Default p = 3/2: at -0.2 the weight 1.2^{-3/2} still leaves 3 / 1.2^{1.5} = 2.28 > 2.
  CHECK(counting_functional(spectrum({1.0, 0.0, -0.2, -7.0}), d) ==
        doctest::Approx(3.0 * std::pow(1.2, -1.5)).epsilon(1e-9));
  CHECK(counting_functional(spectrum({5.0, 4.0, 3.0, 2.0}), d) == doctest::Approx(4.0));
  CHECK_THROWS_AS(counting_functional(spectrum({0.0, 0.0, 0.0, 0.0}), d, 0.0), ParameterError);
}

TEST_CASE("single eigenvalue at the edge counts once at x = 0") {
  Eigen::VectorXd ev(1);
  ev(0) = 2.0;
  CHECK(counting_functional(ev, 3) == 1.0);
}

TEST_CASE("counting functional median is stable in n" * doctest::description("slow")) {
  std::vector<double> tight, loose;
  for (int n : {500, 1000, 2000}) {
    std::vector<double> y, y_loose;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const Eigen::VectorXd ev = eigenvalues_only(sample(n, 3, 40 + seed)).eigenvalues;
      y.push_back(counting_functional(ev, 3));
      y_loose.push_back(counting_functional(ev, 3, 2.0 / 3.0));
    }
    tight.push_back(median(y));
    loose.push_back(median(y_loose));
  }
  const auto [lo, hi] = std::minmax_element(tight.begin(), tight.end());
  CHECK(*hi <= 2.0 * *lo);
  // With p = 2/3 the bulk count dominates and the sup grows with n.
  CHECK(loose[0] < loose[1]);
  CHECK(loose[1] < loose[2]);
}

TEST_CASE("counting functional dominates a grid scan") {
  const RegularGraph g = sample(300, 3, 2);
  const Eigen::VectorXd ev = eigenvalues_only(g).eigenvalues;
  std::vector<double> x(ev.size());
  for (int i = 0; i < ev.size(); ++i) x[i] = edge_rescale(ev(i), 300, 3);
  for (double p : {2.0 / 3.0, kCountingExponent}) {
    const double y = counting_functional(ev, 3, p);
    double grid_best = 0.0;
    for (double t = 0.0; t >= -700.0; t -= 0.01) {
      const double count = static_cast<double>(
          std::count_if(x.begin(), x.end(), [&](double v) { return v >= t; }));
      grid_best = std::max(grid_best, count * std::pow(1.0 + std::abs(t), -p));
    }
    CHECK(y >= grid_best - 1e-12);
    CHECK(y <= grid_best * 1.01 + 1e-12);
  }
}

TEST_CASE("local law scan rows recompute from the Stieltjes transforms") {
  const RegularGraph g = sample(400, 3, 12);
  const Eigen::VectorXd ev = eigenvalues_only(g).eigenvalues;
  LocalLawOptions opt;
  opt.kappa_points = 3;
  opt.eta_points = 4;
  const LocalLawScan scan = local_law_scan(ev, 3, opt);
  REQUIRE(scan.rows.size() == 12);
  double best = 0.0;
  for (const LocalLawRow& row : scan.rows) {
    const HalfPlanePoint z(2.0 + row.kappa, row.eta);
    const double dev = std::abs(stieltjes_empirical(ev, z) - m_d(z, 3));
    CHECK(row.deviation == doctest::Approx(dev).epsilon(1e-12));
    CHECK(row.scaled == doctest::Approx(dev * 400.0 * row.eta).epsilon(1e-12));
    best = std::max(best, row.scaled);
  }
  CHECK(scan.max_scaled == best);
  const std::string csv = to_csv(scan);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  opt.eta_points = 1;
  CHECK_THROWS_AS(local_law_scan(ev, 3, opt), ParameterError);
}

TEST_CASE("empirical Stieltjes transform at eta = 1 is within C/n of m_d") {
  for (int n : {500, 1000}) {
    const Eigen::VectorXd ev = eigenvalues_only(sample(n, 3, 16)).eigenvalues;
    for (double e : {-1.0, 0.5, 2.0}) {
      const HalfPlanePoint z(e, 1.0);
      CHECK(std::abs(stieltjes_empirical(ev, z) - m_d(z, 3)) <= 10.0 / n);
    }
  }
}

TEST_CASE("local law scan of the classical locations stays bounded") {
  const int n = 1000;
  const std::vector<double> gamma = classical_locations(n, 3);
  Eigen::VectorXd ev(n);
  ev(0) = 3.0 / std::sqrt(2.0);
  for (int i = 2; i <= n; ++i) ev(i - 1) = gamma[i - 2];
  const LocalLawScan scan = local_law_scan(ev, 3);
  MESSAGE("classical-location scan max " << scan.max_scaled);
  CHECK(scan.max_scaled <= 2.0);
}

// ----- smoothing --------------------------------------------------------------

TEST_CASE("Poisson smoothing of one atom against an indicator") {
  // 1 - int_{a-L}^{a+L} P_y(x - a) dx = 1 - (2/pi) arctan(L/y).
  for (double y : {0.05, 0.3, 1.0}) {
    const double got = poisson_smoothing_discrepancy({0.7}, {1.0}, indicator(0.2, 1.2), y);
    CHECK(got == doctest::Approx(1.0 - 2.0 / std::numbers::pi * std::atan(0.5 / y)).epsilon(1e-9));
  }
}

TEST_CASE("Poisson smoothing agrees with an independent quadrature") {
  const TestFunction f = smooth_bump(-1.0, 2.0);
  const std::vector<double> atoms = {-0.4, 0.3, 1.1, 3.0};
  const std::vector<double> weights = {0.5, -0.2, 1.3, 0.7};
  const double y = 0.2;
  double direct = 0.0;
  for (std::size_t s = 0; s < atoms.size(); ++s)
    if (atoms[s] > -1.0 && atoms[s] < 2.0) direct += weights[s] * f.f(atoms[s]);
  boost::math::quadrature::tanh_sinh<double> ts;
  const double smoothed = ts.integrate(
      [&](double x) {
        double u = 0.0;
        for (std::size_t s = 0; s < atoms.size(); ++s)
          u += weights[s] * y / ((atoms[s] - x) * (atoms[s] - x) + y * y);
        return u / std::numbers::pi * f.f(x);
      },
      -1.0, 2.0);
  CHECK(poisson_smoothing_discrepancy(atoms, weights, f, y) ==
        doctest::Approx(std::abs(direct - smoothed)).epsilon(1e-8));
  CHECK_THROWS_AS(poisson_smoothing_discrepancy(atoms, weights, f, 0.0), DomainError);
  CHECK_THROWS_AS(poisson_smoothing_discrepancy(atoms, {1.0}, f, y), ParameterError);
}

TEST_CASE("Poisson smoothing of an atom far from the support is tiny") {
  const double got = poisson_smoothing_discrepancy({0.0}, {1.0}, indicator(5.0, 6.0), 1e-3);
  CHECK(got == doctest::Approx(1e-3 / std::numbers::pi * (1.0 / 5.0 - 1.0 / 6.0)).epsilon(1e-4));
}

TEST_CASE("spectral smoothing discrepancy agrees with the atom route") {
  const RegularGraph g = sample(64, 3, 13);
  const SpectralDecomposition sd = eigendecompose(g);
  std::vector<double> atoms(64), weights(64);
  for (int s = 0; s < 64; ++s) {
    atoms[s] = edge_rescale(sd.eigenvalues(s), 64, 3);
    weights[s] = 64.0 * sd.eigenvectors(2, s) * sd.eigenvectors(5, s);
  }
  const TestFunction f = smooth_bump(-6.0, 1.0);
  for (double y : {0.5, 0.1}) {
    CHECK(poisson_smoothing_discrepancy(sd, 2, 5, f, y) ==
          doctest::Approx(poisson_smoothing_discrepancy(atoms, weights, f, y)).epsilon(1e-7));
  }
}

TEST_CASE("smoothing discrepancy decays linearly in y" * doctest::description("slow")) {
  const RegularGraph g = sample(1000, 3, 14);
  const SpectralDecomposition sd = eigendecompose(g);
  const SmoothingStudy st = poisson_smoothing_check(sd, 0, 0, smooth_bump(-8.0, 1.0));
  REQUIRE(st.ys.size() == 4);
  CHECK(st.slope == doctest::Approx(loglog_slope(st.ys, st.discrepancies)).epsilon(1e-12));
  CHECK(st.slope >= 0.8);
}

TEST_CASE("test functions and their derivatives") {
  const TestFunction b = smooth_bump(-1.0, 3.0);
  const TestFunction p = polynomial_bump(2.0, 0.5);
  for (const TestFunction* f : {&b, &p}) {
    CHECK(f->f(f->lo - 0.1) == 0.0);
    CHECK(f->f(f->hi + 0.1) == 0.0);
    for (double t : {0.2, 0.45, 0.7}) {
      const double x = f->lo + t * (f->hi - f->lo), h = 1e-5;
      CHECK(f->df(x) == doctest::Approx((f->f(x + h) - f->f(x - h)) / (2 * h)).epsilon(1e-5));
      CHECK(f->d2f(x) == doctest::Approx((f->df(x + h) - f->df(x - h)) / (2 * h)).epsilon(1e-5));
    }
  }
  CHECK(p.f(2.0) == 1.0);
  CHECK(p.f(2.25) == doctest::Approx(std::pow(0.75, 3)).epsilon(1e-14));
}

// ----- almost-analytic extension bound ---------------------------------------

TEST_CASE("HS decomposition of the zero function vanishes") {
  const Eigen::VectorXd ev = eigenvalues_only(sample(200, 3, 1)).eigenvalues;
  const HsDecomposition h = hs_decomposition_check(ev, 3, zero_function(1.9, 2.1), 0.01, 0.1);
  CHECK(h.lhs == 0.0);
  CHECK(h.term1 == 0.0);
  CHECK(h.term2 == 0.0);
  CHECK(h.term3 == 0.0);
  CHECK(h.term4 == 0.0);
  CHECK(h.ratio == 0.0);
}

TEST_CASE("HS left side is small at the classical locations") {
  const int n = 1000;
  const std::vector<double> gamma = classical_locations(n, 3);
  Eigen::VectorXd ev(n);
  ev(0) = 3.0 / std::sqrt(2.0);
  for (int i = 2; i <= n; ++i) ev(i - 1) = gamma[i - 2];
  const HsDecomposition h = hs_decomposition_check(ev, 3, polynomial_bump(1.95, 0.05), 0.005, 0.1);
  MESSAGE("classical-location lhs " << h.lhs << " ratio " << h.ratio);
  // A quantile Riemann sum of a unit-height bump misses by at most its variation.
  CHECK(h.lhs <= 2.0);
}

TEST_CASE("HS decomposition bounds the linear statistic" * doctest::description("slow")) {
  const Eigen::VectorXd ev = eigenvalues_only(sample(1000, 3, 15)).eigenvalues;
  const TestFunction f = polynomial_bump(2.0, 0.1);
  const HsDecomposition h = hs_decomposition_check(ev, 3, f, 0.005, 0.1);
  // lhs recomputed from its definition with an independent density integral.
  double sum = 0.0;
  for (int i = 0; i < ev.size(); ++i) sum += f.f(ev(i));
  boost::math::quadrature::tanh_sinh<double> ts;
  const double mass = ts.integrate([&](double x) { return f.f(x) * rho_d(x, 3); }, 1.9, 2.0);
  CHECK(h.lhs == doctest::Approx(std::abs(sum - 1000.0 * mass)).epsilon(1e-6));
  for (double t : {h.term1, h.term2, h.term3, h.term4}) CHECK(t >= 0.0);
  CHECK(h.ratio == doctest::Approx(h.lhs / (h.term1 + h.term2 + h.term3 + h.term4)).epsilon(1e-12));
  CHECK(h.ratio <= 10.0);
  CHECK_THROWS(hs_decomposition_check(ev, 3, f, 0.2, 0.1));
}

// ----- exchangeability --------------------------------------------------------

TEST_CASE("switched small graphs keep the uniform class law") {
  Rng rng(4);
  const ExchangeabilityResult r = exchangeability_chisq(8, 3, 0, 0, 20000, rng);
  CHECK(r.switched_trials > 0);
  CHECK(r.chi_square.p_value > 0.01);
  CHECK(r.symmetry.p_value > 0.01);
  long long total = 0;
  for (long long c : r.counts) total += c;
  CHECK(total == 20000);
  double mass = 0.0;
  for (double p : r.probabilities) mass += p;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  long long table = 0;
  for (const auto& row : r.pair_counts)
    for (long long c : row) table += c;
  CHECK(table == 20000);
}

TEST_CASE("biased sampler is detected") {
  Rng fixed_rng(5);
  const RegularGraph fixed = sample_regular_graph(8, 3, fixed_rng);
  const GraphSampler biased = [&](Rng& r) {
    std::bernoulli_distribution coin(0.3);
    if (coin(r)) return fixed;
    return sample_regular_graph(8, 3, r);
  };
  Rng rng(6);
  const ExchangeabilityResult r = exchangeability_chisq(8, 3, 0, 0, 20000, rng, biased);
  CHECK(r.chi_square.p_value < 1e-3);
}

TEST_CASE("exchangeability edge cases") {
  Rng rng(7);
  const ExchangeabilityResult far = exchangeability_chisq(8, 3, 0, 1000, 500, rng);
  CHECK(far.switched_trials == 0);
  CHECK(far.chi_square.p_value > 1e-3);
  // Without switchings the pair table is diagonal.
  for (std::size_t a = 0; a < far.pair_counts.size(); ++a)
    for (std::size_t b = 0; b < far.pair_counts.size(); ++b)
      if (a != b) CHECK(far.pair_counts[a][b] == 0);
  CHECK_THROWS_AS(exchangeability_chisq(10, 3, 0, 0, 10, rng), ParameterError);
}

TEST_CASE("symmetry test") {
  const std::vector<std::vector<long long>> sym = {{10, 5, 3}, {5, 8, 2}, {3, 2, 9}};
  CHECK(symmetry_test(sym).statistic == 0.0);
  CHECK(symmetry_test(sym).p_value == doctest::Approx(1.0));
  const std::vector<std::vector<long long>> skew = {{10, 40, 3}, {5, 8, 2}, {3, 2, 9}};
  // Bowker: (40 - 5)^2 / 45 with 3 degrees of freedom.
  CHECK(symmetry_test(skew).statistic == doctest::Approx(35.0 * 35.0 / 45.0).epsilon(1e-12));
  CHECK(symmetry_test(skew).p_value < 1e-3);
}

// ----- Wigner baseline ----------------------------------------------------------

TEST_CASE("Wigner reference overlaps and edge points") {
  Rng rng(8);
  std::vector<double> diag, off, top;
  for (int m = 0; m < 60; ++m) {
    const WignerSample w = wigner_reference_mode(300, 3, rng);
    REQUIRE(w.rescaled.size() == 3);
    CHECK(std::is_sorted(w.rescaled.rbegin(), w.rescaled.rend()));
    REQUIRE(w.diagonal_overlaps.size() == 8);
    REQUIRE(w.offdiagonal_overlaps.size() == 8);
    diag.insert(diag.end(), w.diagonal_overlaps.begin(), w.diagonal_overlaps.end());
    off.insert(off.end(), w.offdiagonal_overlaps.begin(), w.offdiagonal_overlaps.end());
    top.push_back(w.rescaled[0]);
  }
  CHECK(std::abs(mean(diag) - 1.0) <= 0.2);
  CHECK(std::abs(mean(off)) <= 0.2);
  CHECK(std::abs(mean(top) + 1.2065) <= 0.6);
  Rng other(1);
  CHECK_THROWS_AS(wigner_reference_mode(5000, 1, other), ParameterError);
}

// ----- reports --------------------------------------------------------------

TEST_CASE("metric gates") {
  CHECK(Metric{"a", 5.0, Gate::kReport, 0.0, 0.0}.passed());
  CHECK(Metric{"a", 1.0, Gate::kAtMost, 1.0, 0.0}.passed());
  CHECK_FALSE(Metric{"a", 1.1, Gate::kAtMost, 1.0, 0.0}.passed());
  CHECK(Metric{"a", 1.0, Gate::kAtLeast, 1.0, 0.0}.passed());
  CHECK_FALSE(Metric{"a", 0.9, Gate::kAtLeast, 1.0, 0.0}.passed());
  CHECK(Metric{"a", 3.25, Gate::kWithin, 0.3, 3.0}.passed());
  CHECK_FALSE(Metric{"a", 2.6, Gate::kWithin, 0.3, 3.0}.passed());
  CHECK_FALSE(Metric{"a", std::nan(""), Gate::kAtMost, 1.0, 0.0}.passed());
}

TEST_CASE("report JSON round trip") {
  ExperimentReport r;
  r.name = "tw1-edge";
  r.metrics = {{"ks-distance", 0.125, Gate::kAtMost, 0.15, 0.0},
               {"fourth-moment", 3.1, Gate::kWithin, 0.3, 3.0},
               {"mean", -1.5, Gate::kReport, 0.0, 0.0}};
  r.sample_count = 200;
  r.runtime_seconds = 12.5;
  r.config_hash = "00ff00ff00ff00ff";
  r.details = {{"note", "x"}};
  const nlohmann::json j = to_json(r);
  CHECK(j["pass"] == true);
  CHECK(j["sample-count"] == 200);
  CHECK(j["timing"]["runtime-seconds"] == 12.5);
  CHECK(j["metrics"][0]["gate"] == "at-most");
  const ExperimentReport back = report_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.metric("fourth-moment").target == 3.0);
  CHECK_THROWS_AS(back.metric("missing"), ParameterError);
  r.metrics[0].value = 0.2;
  CHECK_FALSE(r.passed());
  CHECK(to_json(r)["pass"] == false);
}

// ----- worker pool ------------------------------------------------------------

TEST_CASE("parallel_for runs each index once and propagates errors") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(50, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw DataError("boom");
                               }),
                  DataError);
  CHECK_THROWS_AS(parallel_for(5, 0, [](std::size_t) {}), ParameterError);
  parallel_for(0, 2, [](std::size_t) { FAIL("no index expected"); });
}

TEST_CASE("worker count from the environment") {
  ::setenv("REGWAVE_WORKERS", "3", 1);
  CHECK(default_worker_count() == 3);
  ::setenv("REGWAVE_WORKERS", "zero", 1);
  CHECK_THROWS_AS(default_worker_count(), ParameterError);
  ::setenv("REGWAVE_WORKERS", "0", 1);
  CHECK_THROWS_AS(default_worker_count(), ParameterError);
  ::unsetenv("REGWAVE_WORKERS");
  CHECK(default_worker_count() >= 1);
}
