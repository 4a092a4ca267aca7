#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "regwave/edge_stats.hpp"
#include "regwave/harness.hpp"
#include "regwave/isomorphism.hpp"
#include "regwave/parallel.hpp"
#include "regwave/resampling.hpp"
#include "regwave/spectral.hpp"
#include "regwave/stats.hpp"
#include "regwave/tree_green.hpp"

namespace regwave {

namespace {

// Stream seeds: per-sample streams use derive_seed(stream_base(seed, k), i),
// so distinct roles inside one experiment never share a stream.
std::uint64_t stream_base(std::uint64_t seed, std::uint64_t role) {
  return derive_seed(seed, 0x5eed000000000000ULL + role);
}

std::ostringstream csv() {
  std::ostringstream out;
  out << std::setprecision(17);
  return out;
}

Metric at_most(std::string name, double value, double bound) {
  return {std::move(name), value, Gate::kAtMost, bound, 0.0};
}
Metric at_least(std::string name, double value, double bound) {
  return {std::move(name), value, Gate::kAtLeast, bound, 0.0};
}
Metric within(std::string name, double value, double target, double bound) {
  return {std::move(name), value, Gate::kWithin, bound, target};
}
Metric reported(std::string name, double value) {
  return {std::move(name), value, Gate::kReport, 0.0, 0.0};
}

double tolerance(const RunConfig& c, const std::string& name) { return c.tolerances.at(name); }

RegularGraph sample_graph(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  return sample_regular_graph(n, d, rng);
}

Eigen::MatrixXcd shifted_dense(const RegularGraph& g, Complex z) {
  Eigen::MatrixXcd m = Eigen::MatrixXd(normalized_adjacency(g)).cast<Complex>();
  m.diagonal().array() -= z;
  return m;
}

// ----- identity-suite ------------------------------------------------------

struct FixtureResiduals {
  int d = 0;
  int n = 0;
  std::uint64_t seed = 0;
  double ward = 0.0;
  double schur = 0.0;
  double im_inverse = 0.0;
  double poisson = 0.0;
  double second_moment = 0.0;
  double mean = 0.0;
};

FixtureResiduals identity_fixture(int d, int n, std::uint64_t seed) {
  FixtureResiduals r{d, n, seed};
  const RegularGraph g = sample_graph(n, d, seed);
  const SpectralDecomposition sd = eigendecompose(g);
  const HalfPlanePoint zw(0.7, 0.5);
  r.ward = ward_identity_check(green_matrix(sd, zw), zw.im());
  const TreeBall b = ball(g, 0, 1);
  r.schur = schur_identity_check(sd, g, std::vector<int>(b.vertices.begin(), b.vertices.end()),
                                 HalfPlanePoint(1.0, 0.1));
  r.im_inverse = im_inverse_identity_check(shifted_dense(g, Complex(0.5, 0.1)));
  for (const HalfPlanePoint w : {HalfPlanePoint(-1.0, 1.0), HalfPlanePoint(0.5, 0.3),
                                 HalfPlanePoint(2.0, 2.0)}) {
    for (const auto& [i, j] : {std::pair{0, 0}, std::pair{0, 1}}) {
      const double direct = rescaled_im_green_direct(g, i, j, w);
      r.poisson = std::max(r.poisson, std::abs(rescaled_im_green(sd, i, j, w) - direct) /
                                          std::max(1.0, std::abs(direct)));
    }
  }
  for (int s = 1; s <= 4; ++s) {
    for (int t = 1; t <= 4; ++t)
      r.second_moment = std::max(r.second_moment, switching_moment_identity(sd, g, s, t).residual());
    const double expected = s == 1 ? 1.0 - 1.0 / std::sqrt(d - 1.0) : 0.0;
    r.mean = std::max(r.mean, std::abs(switching_mean_identity(sd, g, s) - expected));
  }
  return r;
}

double fixed_point_residual(int d, bool regular) {
  double worst = 0.0;
  for (const HalfPlanePoint z : {HalfPlanePoint(0.5, 0.5), HalfPlanePoint(1.5, 0.2),
                                 HalfPlanePoint(-1.0, 1.0), HalfPlanePoint(2.1, 0.3)})
    for (int ell = 0; ell <= 8; ++ell) {
      const Complex m = m_sc(z);
      const Complex err = regular ? x_ell(m, z, ell, d) - m_d(z, d) : y_ell(m, z, ell) - m;
      worst = std::max(worst, std::abs(err));
    }
  return worst;
}

double covariance_eigen_residual(int d) {
  double worst = 0.0;
  const TreeBall b = regular_tree_ball(d, 3);
  std::vector<std::vector<int>> adj(b.size());
  for (auto [p, q] : b.local_edges) {
    adj[p].push_back(q);
    adj[q].push_back(p);
  }
  for (double lambda : {2.0 * std::sqrt(d - 1.0), 0.3, -1.7}) {
    const WaveCovariance cov = wave_covariance(d, lambda, b);
    for (int i = 0; i < b.size(); ++i) {
      if (b.depth[i] >= b.radius) continue;
      for (int j = 0; j < b.size(); ++j) {
        double sum = 0.0;
        for (int v : adj[i]) sum += cov.matrix(v, j);
        worst = std::max(worst, std::abs(sum - lambda * cov.matrix(i, j)));
      }
    }
  }
  return worst;
}

ExperimentReport identity_suite(const RunConfig& c, ExperimentContext& ctx) {
  if (c.n < 6) throw ParameterError("identity suite needs n >= 6");
  const std::vector<int> degrees = {3, 4, 5};
  const std::size_t per_degree = static_cast<std::size_t>(c.samples);
  std::vector<FixtureResiduals> rows(degrees.size() * per_degree);
  parallel_for(rows.size(), ctx.workers, [&](std::size_t k) {
    const int d = degrees[k / per_degree];
    const std::size_t i = k % per_degree;
    int n = std::min(c.n, 64 << (i % 4));
    if ((n * d) % 2 != 0) --n;
    rows[k] = identity_fixture(d, n, derive_seed(stream_base(c.seed, d), i));
  });

  FixtureResiduals worst;
  std::ostringstream out = csv();
  out << "d,n,seed,ward,schur,im_inverse,poisson,second_moment,mean\n";
  for (const FixtureResiduals& r : rows) {
    out << r.d << ',' << r.n << ',' << r.seed << ',' << r.ward << ',' << r.schur << ','
        << r.im_inverse << ',' << r.poisson << ',' << r.second_moment << ',' << r.mean << '\n';
    worst.ward = std::max(worst.ward, r.ward);
    worst.schur = std::max(worst.schur, r.schur);
    worst.im_inverse = std::max(worst.im_inverse, r.im_inverse);
    worst.poisson = std::max(worst.poisson, r.poisson);
    worst.second_moment = std::max(worst.second_moment, r.second_moment);
    worst.mean = std::max(worst.mean, r.mean);
  }
  double y_fixed = 0.0, x_fixed = 0.0, covariance = 0.0;
  for (int d : degrees) {
    y_fixed = std::max(y_fixed, fixed_point_residual(d, false));
    x_fixed = std::max(x_fixed, fixed_point_residual(d, true));
    covariance = std::max(covariance, covariance_eigen_residual(d));
  }
  ctx.add_artifact("identity_residuals.csv", out.str());

  const double tol = tolerance(c, "residual");
  ExperimentReport rep;
  rep.metrics = {at_most("ward", worst.ward, tol),
                 at_most("schur", worst.schur, tol),
                 at_most("im-inverse", worst.im_inverse, tol),
                 at_most("poisson-dual-route", worst.poisson, tol),
                 at_most("y-fixed-point", y_fixed, tol),
                 at_most("x-fixed-point", x_fixed, tol),
                 at_most("covariance-eigen-equation", covariance, tol),
                 at_most("switching-second-moment", worst.second_moment, tol),
                 at_most("switching-mean", worst.mean, tol)};
  rep.sample_count = static_cast<long long>(rows.size());
  rep.details = {{"degrees", degrees}, {"largest-n", c.n}};
  return rep;
}

// ----- yl-expansion ----------------------------------------------------------

ExperimentReport yl_expansion(const RunConfig& c, ExperimentContext& ctx) {
  const std::vector<double> offsets{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, derivative = 0.0;
  std::ostringstream out = csv();
  out << "re,im,ell,slope,derivative_error\n";
  long long studies = 0;
  for (const HalfPlanePoint z : {HalfPlanePoint(0.5, 0.5), HalfPlanePoint(1.5, 0.2),
                                 HalfPlanePoint(-1.0, 1.0), HalfPlanePoint(2.1, 0.3)})
    for (int ell = 0; ell <= c.ell; ++ell) {
      const ExpansionStudy s = y_ell_expansion_study(z, ell, c.d, offsets);
      lo = std::min(lo, s.slope);
      hi = std::max(hi, s.slope);
      derivative = std::max(derivative, s.derivative_error);
      out << z.re() << ',' << z.im() << ',' << ell << ',' << s.slope << ',' << s.derivative_error
          << '\n';
      ++studies;
    }
  ctx.add_artifact("expansion.csv", out.str());
  const double half = tolerance(c, "slope-half-width");
  ExperimentReport rep;
  rep.metrics = {at_least("min-slope", lo, 3.0 - half), at_most("max-slope", hi, 3.0 + half),
                 at_most("derivative-error", derivative, tolerance(c, "derivative"))};
  rep.sample_count = studies;
  return rep;
}

// ----- exchangeability -------------------------------------------------------

ExperimentReport exchangeability(const RunConfig& c, ExperimentContext& ctx) {
  Rng uniform_rng(stream_base(c.seed, 0));
  const ExchangeabilityResult uniform =
      exchangeability_chisq(c.n, c.d, c.ell, c.big_r, c.trials, uniform_rng);

  // Negative control: 30% of the draws return one fixed graph.
  const RegularGraph fixed = sample_graph(c.n, c.d, stream_base(c.seed, 1));
  const GraphSampler biased = [&](Rng& r) {
    std::bernoulli_distribution coin(0.3);
    if (coin(r)) return fixed;
    return sample_regular_graph(c.n, c.d, r);
  };
  Rng control_rng(stream_base(c.seed, 2));
  const ExchangeabilityResult control =
      exchangeability_chisq(c.n, c.d, c.ell, c.big_r, c.trials, control_rng, biased);

  std::ostringstream out = csv();
  out << "class,probability,count,control_count\n";
  for (std::size_t k = 0; k < uniform.counts.size(); ++k)
    out << k << ',' << uniform.probabilities[k] << ',' << uniform.counts[k] << ','
        << control.counts[k] << '\n';
  ctx.add_artifact("class_counts.csv", out.str());
  std::ostringstream pairs = csv();
  pairs << "class_before,class_after,count\n";
  for (std::size_t a = 0; a < uniform.pair_counts.size(); ++a)
    for (std::size_t b = 0; b < uniform.pair_counts[a].size(); ++b)
      pairs << a << ',' << b << ',' << uniform.pair_counts[a][b] << '\n';
  ctx.add_artifact("pair_counts.csv", pairs.str());

  ExperimentReport rep;
  rep.metrics = {
      at_least("uniform-p-value", uniform.chi_square.p_value, tolerance(c, "p-floor")),
      at_most("control-p-value", control.chi_square.p_value, tolerance(c, "control-p-ceiling")),
      reported("symmetry-p-value", uniform.symmetry.p_value),
      reported("switched-fraction",
               static_cast<double>(uniform.switched_trials) / static_cast<double>(c.trials)),
      reported("uniform-chi-square", uniform.chi_square.statistic)};
  rep.sample_count = 2 * c.trials;
  rep.details = {{"classes", uniform.counts.size()}, {"switched-trials", uniform.switched_trials}};
  return rep;
}

// ----- ensemble experiments --------------------------------------------------

EnsembleOptions ensemble_options(const RunConfig& c, int radius, int centers) {
  EnsembleOptions o;
  o.n = c.n;
  o.d = c.d;
  o.k = 2;
  o.radius = radius;
  o.centers = centers;
  o.method = c.method;
  return o;
}

ExperimentReport gaussian_wave_cov(const RunConfig& c, ExperimentContext& ctx) {
  const auto ensemble = generate_ensemble(ensemble_options(c, c.r, c.centers),
                                          stream_base(c.seed, 0), static_cast<int>(c.samples),
                                          ctx.workers);
  const WaveCovarianceEstimate est = wave_covariance_estimate(ensemble, 2, c.r);
  ctx.add_artifact("depth_classes.csv", depth_classes_csv(est));
  ctx.add_artifact("ensemble.csv", ensemble_csv(ensemble));
  std::ostringstream cov = csv();
  cov << "i,j,empirical,target\n";
  for (int i = 0; i < est.empirical.rows(); ++i)
    for (int j = 0; j < est.empirical.cols(); ++j)
      cov << i << ',' << j << ',' << est.empirical(i, j) << ',' << est.target(i, j) << '\n';
  ctx.add_artifact("covariance.csv", cov.str());

  ExperimentReport rep;
  for (int k = 0; k <= c.r; ++k) {
    const std::string name = "depth-" + std::to_string(k) + "-mean";
    if (k <= 2) {
      rep.metrics.push_back(within(name, est.depth_mean[k], est.depth_target[k],
                                   tolerance(c, "depth-" + std::to_string(k))));
    } else {
      rep.metrics.push_back(reported(name, est.depth_mean[k]));
    }
    rep.metrics.push_back(
        reported("depth-" + std::to_string(k) + "-standard-error", est.depth_standard_error[k]));
  }
  rep.metrics.push_back(within("fourth-moment", est.fourth_moment, 3.0, tolerance(c, "fourth-moment")));
  rep.metrics.push_back(reported("fourth-moment-standard-error", est.fourth_moment_standard_error));
  rep.metrics.push_back(reported("max-abs-deviation", est.max_abs_deviation));
  rep.sample_count = c.samples;
  rep.details = {{"samples-used", est.samples_used},
                 {"samples-degenerate", est.samples_degenerate},
                 {"centers-used", est.centers_used},
                 {"centers-excluded", est.centers_excluded},
                 {"depth-targets", est.depth_target}};
  return rep;
}

std::vector<double> airy_reference_samples(const RunConfig& c, std::uint64_t base, int workers) {
  std::vector<double> ref(c.reference_samples);
  parallel_for(ref.size(), workers, [&](std::size_t i) {
    Rng rng(derive_seed(base, i));
    ref[i] = airy1_reference(1, c.embed_n, rng)[0];
  });
  return ref;
}

std::string column_csv(const std::string& header, const std::vector<double>& values) {
  std::ostringstream out = csv();
  out << "index," << header << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) out << i << ',' << values[i] << '\n';
  return out.str();
}

ExperimentReport tw1_edge(const RunConfig& c, ExperimentContext& ctx) {
  const auto ensemble = generate_ensemble(ensemble_options(c, 0, 1), stream_base(c.seed, 0),
                                          static_cast<int>(c.samples), ctx.workers);
  std::vector<double> graph;
  for (const EnsembleSample& e : ensemble) graph.push_back(e.rescaled(2));
  const std::vector<double> ref = airy_reference_samples(c, stream_base(c.seed, 1), ctx.workers);
  const KsResult ks = tw1_ks_test(graph, ref, tolerance(c, "ks-distance"));
  ctx.add_artifact("edge_samples.csv", ensemble_csv(ensemble));
  ctx.add_artifact("reference.csv", column_csv("rescaled", ref));

  ExperimentReport rep;
  rep.metrics = {at_most("ks-distance", ks.distance, tolerance(c, "ks-distance")),
                 reported("ks-p-value", ks.p_value),
                 reported("graph-mean", mean(graph)),
                 reported("graph-standard-deviation", std::sqrt(sample_variance(graph))),
                 reported("reference-mean", mean(ref)),
                 reported("reference-standard-deviation", std::sqrt(sample_variance(ref)))};
  rep.sample_count = c.samples + c.reference_samples;
  return rep;
}

ExperimentReport independence(const RunConfig& c, ExperimentContext& ctx) {
  const auto ensemble = generate_ensemble(ensemble_options(c, c.r, c.centers),
                                          stream_base(c.seed, 0), static_cast<int>(c.samples),
                                          ctx.workers);
  std::vector<double> x, y;
  std::ostringstream out = csv();
  out << "seed,rescaled,overlap\n";
  for (const EnsembleSample& e : ensemble) {
    if (e.near_degenerate(2)) continue;
    for (const WaveRestriction& w : e.wave_restrictions) {
      if (!w.ball.is_tree) continue;
      x.push_back(e.rescaled(2));
      y.push_back(w.values[0][0] * w.values[0][0]);
      out << e.seed << ',' << x.back() << ',' << y.back() << '\n';
      break;
    }
  }
  ctx.add_artifact("pairs.csv", out.str());
  const IndependenceResult ind = independence_test(x, y);
  const double bound = 3.0 / std::sqrt(static_cast<double>(ind.samples)) + tolerance(c, "slack");
  ExperimentReport rep;
  rep.metrics = {at_most("abs-correlation", std::abs(ind.correlation), bound),
                 reported("correlation", ind.correlation)};
  rep.sample_count = ind.samples;
  return rep;
}

// ----- spectral statistics ---------------------------------------------------

std::vector<Eigen::VectorXd> spectra(const RunConfig& c, int n, std::uint64_t base, int workers) {
  std::vector<Eigen::VectorXd> out(c.samples);
  parallel_for(out.size(), workers, [&](std::size_t i) {
    out[i] = eigenvalues_only(sample_graph(n, c.d, derive_seed(base, i))).eigenvalues;
  });
  return out;
}

ExperimentReport rigidity(const RunConfig& c, ExperimentContext& ctx) {
  const auto all = spectra(c, c.n, stream_base(c.seed, 0), ctx.workers);
  std::vector<double> stats;
  int passes = 0;
  double bound = 0.0;
  std::ostringstream out = csv();
  out << "sample,max_statistic,argmax,bound,pass\n";
  for (std::size_t i = 0; i < all.size(); ++i) {
    const RigidityReport r = rigidity_report(all[i], c.d);
    stats.push_back(r.max_statistic);
    passes += r.pass;
    bound = r.bound;
    out << i << ',' << r.max_statistic << ',' << r.argmax << ',' << r.bound << ',' << r.pass << '\n';
  }
  ctx.add_artifact("rigidity.csv", out.str());
  ExperimentReport rep;
  rep.metrics = {at_least("pass-fraction", passes / static_cast<double>(c.samples),
                          tolerance(c, "pass-fraction")),
                 reported("median-max-statistic", median(stats)),
                 reported("largest-max-statistic", *std::max_element(stats.begin(), stats.end())),
                 reported("bound", bound)};
  rep.sample_count = c.samples;
  return rep;
}

ExperimentReport poisson_smoothing(const RunConfig& c, ExperimentContext& ctx) {
  std::vector<SmoothingStudy> studies(c.samples);
  const std::uint64_t base = stream_base(c.seed, 0);
  parallel_for(studies.size(), ctx.workers, [&](std::size_t i) {
    const SpectralDecomposition sd = eigendecompose(sample_graph(c.n, c.d, derive_seed(base, i)));
    studies[i] = poisson_smoothing_check(sd, 0, 0, smooth_bump(-8.0, 1.0));
  });
  std::vector<double> slopes;
  std::ostringstream out = csv();
  out << "sample,y,discrepancy\n";
  for (std::size_t i = 0; i < studies.size(); ++i) {
    slopes.push_back(studies[i].slope);
    for (std::size_t k = 0; k < studies[i].ys.size(); ++k)
      out << i << ',' << studies[i].ys[k] << ',' << studies[i].discrepancies[k] << '\n';
  }
  ctx.add_artifact("smoothing.csv", out.str());
  ExperimentReport rep;
  const double floor = tolerance(c, "slope-floor");
  const auto above = std::count_if(slopes.begin(), slopes.end(), [&](double x) { return x >= floor; });
  rep.metrics = {at_least("median-slope", median(slopes), floor),
                 reported("min-slope", *std::min_element(slopes.begin(), slopes.end())),
                 reported("fraction-above-floor", above / static_cast<double>(slopes.size())),
                 reported("mean-slope", mean(slopes))};
  rep.sample_count = c.samples;
  return rep;
}

ExperimentReport switch_moment_exact(const RunConfig& c, ExperimentContext& ctx) {
  struct Row {
    double second = 0.0, mean = 0.0, excluded_ratio = 0.0;
  };
  std::vector<Row> rows(c.samples);
  const std::uint64_t base = stream_base(c.seed, 0);
  parallel_for(rows.size(), ctx.workers, [&](std::size_t i) {
    const RegularGraph g = sample_graph(c.n, c.d, derive_seed(base, i));
    const SpectralDecomposition sd = eigendecompose(g);
    Row& r = rows[i];
    for (int s = 1; s <= 6; ++s) {
      for (int t = 1; t <= 6; ++t)
        r.second = std::max(r.second, switching_moment_identity(sd, g, s, t).residual());
      const double expected = s == 1 ? 1.0 - 1.0 / std::sqrt(c.d - 1.0) : 0.0;
      r.mean = std::max(r.mean, std::abs(switching_mean_identity(sd, g, s) - expected));
    }
    const ExcludedMoment e = switching_moment_excluded(sd, g, 2, 2, 0, c.ell);
    r.excluded_ratio = e.difference / e.bound;
  });
  Row worst;
  std::ostringstream out = csv();
  out << "sample,second_moment_residual,mean_residual,excluded_ratio\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << i << ',' << rows[i].second << ',' << rows[i].mean << ',' << rows[i].excluded_ratio << '\n';
    worst.second = std::max(worst.second, rows[i].second);
    worst.mean = std::max(worst.mean, rows[i].mean);
    worst.excluded_ratio = std::max(worst.excluded_ratio, rows[i].excluded_ratio);
  }
  ctx.add_artifact("switching_moments.csv", out.str());
  const double tol = tolerance(c, "residual");
  ExperimentReport rep;
  rep.metrics = {at_most("second-moment-residual", worst.second, tol),
                 at_most("mean-residual", worst.mean, tol),
                 at_most("excluded-difference-over-bound", worst.excluded_ratio, 1.0)};
  rep.sample_count = c.samples;
  return rep;
}

ExperimentReport local_law(const RunConfig& c, ExperimentContext& ctx) {
  const auto all = spectra(c, c.n, stream_base(c.seed, 0), ctx.workers);
  std::vector<double> maxima;
  std::ostringstream out = csv();
  out << "sample,kappa,eta,deviation,scaled\n";
  for (std::size_t i = 0; i < all.size(); ++i) {
    const LocalLawScan scan = local_law_scan(all[i], c.d);
    maxima.push_back(scan.max_scaled);
    for (const LocalLawRow& row : scan.rows)
      out << i << ',' << row.kappa << ',' << row.eta << ',' << row.deviation << ',' << row.scaled
          << '\n';
  }
  ctx.add_artifact("local_law.csv", out.str());
  ExperimentReport rep;
  rep.metrics = {at_most("quantile-95-max-scaled", quantile(maxima, 0.95), tolerance(c, "scaled-bound")),
                 reported("median-max-scaled", median(maxima))};
  rep.sample_count = c.samples;
  return rep;
}

ExperimentReport hs_decomposition(const RunConfig& c, ExperimentContext& ctx) {
  const auto all = spectra(c, c.n, stream_base(c.seed, 0), ctx.workers);
  std::vector<HsDecomposition> rows(all.size());
  const TestFunction f = polynomial_bump(2.0, 0.1);
  parallel_for(rows.size(), ctx.workers,
               [&](std::size_t i) { rows[i] = hs_decomposition_check(all[i], c.d, f, 0.005, 0.1); });
  std::vector<double> ratios;
  std::ostringstream out = csv();
  out << "sample,lhs,term1,term2,term3,term4,ratio\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const HsDecomposition& h = rows[i];
    ratios.push_back(h.ratio);
    out << i << ',' << h.lhs << ',' << h.term1 << ',' << h.term2 << ',' << h.term3 << ','
        << h.term4 << ',' << h.ratio << '\n';
  }
  ctx.add_artifact("hs_terms.csv", out.str());
  ExperimentReport rep;
  rep.metrics = {at_most("max-ratio", *std::max_element(ratios.begin(), ratios.end()),
                         tolerance(c, "ratio-bound")),
                 reported("median-ratio", median(ratios))};
  rep.sample_count = c.samples;
  rep.details = {{"eta", 0.005}, {"gamma", 0.1}, {"test-function", "polynomial bump at 2, half-width 0.1"}};
  return rep;
}

ExperimentReport counting(const RunConfig& c, ExperimentContext& ctx) {
  const std::vector<int> sizes = {c.n / 2, c.n, 2 * c.n};
  for (int n : sizes)
    if (n <= c.d || (n * c.d) % 2 != 0) throw ParameterError("n/2, n and 2n must be valid sizes");
  std::vector<double> medians;
  std::ostringstream out = csv();
  out << "n,sample,y\n";
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const auto all = spectra(c, sizes[k], stream_base(c.seed, k), ctx.workers);
    std::vector<double> ys;
    for (std::size_t i = 0; i < all.size(); ++i) {
      ys.push_back(counting_functional(all[i], c.d));
      out << sizes[k] << ',' << i << ',' << ys.back() << '\n';
    }
    medians.push_back(median(ys));
  }
  ctx.add_artifact("counting.csv", out.str());
  const auto [lo, hi] = std::minmax_element(medians.begin(), medians.end());
  ExperimentReport rep;
  rep.metrics = {at_most("median-spread-factor", *hi / *lo, tolerance(c, "stability-factor")),
                 reported("median-half-n", medians[0]),
                 reported("median-n", medians[1]),
                 reported("median-double-n", medians[2])};
  rep.sample_count = 3 * c.samples;
  rep.details = {{"exponent", kCountingExponent}};
  return rep;
}

ExperimentReport wigner_reference(const RunConfig& c, ExperimentContext& ctx) {
  std::vector<WignerSample> samples(c.samples);
  const std::uint64_t base = stream_base(c.seed, 0);
  parallel_for(samples.size(), ctx.workers, [&](std::size_t i) {
    Rng rng(derive_seed(base, i));
    samples[i] = wigner_reference_mode(c.n, 2, rng);
  });
  std::vector<double> top, diag, off;
  for (const WignerSample& w : samples) {
    top.push_back(w.rescaled[0]);
    diag.insert(diag.end(), w.diagonal_overlaps.begin(), w.diagonal_overlaps.end());
    off.insert(off.end(), w.offdiagonal_overlaps.begin(), w.offdiagonal_overlaps.end());
  }
  const std::vector<double> ref = airy_reference_samples(c, stream_base(c.seed, 1), ctx.workers);
  ctx.add_artifact("wigner_top.csv", column_csv("rescaled", top));
  ExperimentReport rep;
  rep.metrics = {within("diagonal-overlap-mean", mean(diag), 1.0, tolerance(c, "diagonal")),
                 within("offdiagonal-overlap-mean", mean(off), 0.0, tolerance(c, "offdiagonal")),
                 at_most("ks-distance", ks_distance(top, ref), tolerance(c, "ks-distance")),
                 reported("top-mean", mean(top))};
  rep.sample_count = c.samples + c.reference_samples;
  return rep;
}

// ----- graph and resampling experiments --------------------------------------

ExperimentReport omega_bar(const RunConfig& c, ExperimentContext& ctx) {
  constexpr double kCFrak = 0.3;
  constexpr int kOmega = 1;
  std::vector<OmegaBarResult> rows(c.samples);
  const std::uint64_t base = stream_base(c.seed, 0);
  parallel_for(rows.size(), ctx.workers, [&](std::size_t i) {
    rows[i] = classify_omega_bar(sample_graph(c.n, c.d, derive_seed(base, i)), kCFrak, kOmega);
  });
  int flags = 0;
  std::ostringstream out = csv();
  out << "sample,flag,bad_vertices,max_excess,radius\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    flags += rows[i].flag;
    out << i << ',' << rows[i].flag << ',' << rows[i].bad_vertex_count << ','
        << rows[i].max_excess << ',' << rows[i].radius << '\n';
  }
  ctx.add_artifact("omega_bar.csv", out.str());
  const double rate = flags / static_cast<double>(c.samples);
  ExperimentReport rep;
  rep.metrics.push_back(reported("flag-rate", rate));
  // At radius 1 a vertex is bad iff it lies on a triangle; triangle counts
  // are asymptotically Poisson((d-1)^3/6) and each triangle has 3 vertices.
  if (rows.front().radius == 1) {
    const double lambda = std::pow(c.d - 1.0, 3) / 6.0;
    const int max_triangles =
        static_cast<int>(std::floor(std::pow(static_cast<double>(c.n), kCFrak) / 3.0));
    double p = 0.0, term = std::exp(-lambda);
    for (int k = 0; k <= max_triangles; ++k) {
      p += term;
      term *= lambda / (k + 1);
    }
    const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(c.samples));
    rep.metrics.push_back(within("flag-rate-vs-triangle-law", rate, p,
                                 tolerance(c, "binomial-sds") * std::max(sd, 1e-12)));
    rep.details["triangle-law-probability"] = p;
  }
  rep.sample_count = c.samples;
  rep.details["c-frak"] = kCFrak;
  rep.details["omega-d"] = kOmega;
  return rep;
}

ExperimentReport uniformity(const RunConfig& c, ExperimentContext& ctx) {
  if (c.n > 8) throw ParameterError("uniformity needs n <= 8");
  const SmallGraphCatalogue cat(c.n, c.d);
  std::vector<long long> counts(cat.class_count(), 0);
  Rng rng(stream_base(c.seed, 0));
  for (long long t = 0; t < c.trials; ++t) ++counts[cat.class_of(sample_regular_graph(c.n, c.d, rng))];
  std::vector<double> probs;
  for (int k = 0; k < cat.class_count(); ++k) probs.push_back(cat.class_probability(k));
  const ChiSquareResult chi = chi_square_test(counts, probs);
  std::ostringstream out = csv();
  out << "class,probability,count\n";
  for (int k = 0; k < cat.class_count(); ++k) out << k << ',' << probs[k] << ',' << counts[k] << '\n';
  ctx.add_artifact("class_counts.csv", out.str());
  ExperimentReport rep;
  rep.metrics = {at_least("p-value", chi.p_value, tolerance(c, "p-floor")),
                 reported("chi-square", chi.statistic)};
  rep.sample_count = c.trials;
  rep.details = {{"classes", cat.class_count()}, {"labeled-graphs", cat.labeled_count()}};
  return rep;
}

ExperimentReport far_field(const RunConfig& c, ExperimentContext& ctx) {
  std::vector<char> hits(c.samples, 0);
  const std::uint64_t base = stream_base(c.seed, 0);
  parallel_for(hits.size(), ctx.workers, [&](std::size_t i) {
    Rng rng(derive_seed(base, i));
    const RegularGraph g = sample_regular_graph(c.n, c.d, rng);
    const ResamplingData data = sample_resampling_data(g, 0, c.ell, c.big_r, rng);
    hits[i] = far_field_indicator(g, data, {g.neighbors(0)[0], 0}, c.big_r);
  });
  std::ostringstream out = csv();
  out << "sample,indicator\n";
  int ok = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    ok += hits[i];
    out << i << ',' << static_cast<int>(hits[i]) << '\n';
  }
  ctx.add_artifact("far_field.csv", out.str());
  ExperimentReport rep;
  rep.metrics = {at_least("success-rate", ok / static_cast<double>(c.samples),
                          tolerance(c, "success-floor"))};
  rep.sample_count = c.samples;
  return rep;
}

// ----- registry -------------------------------------------------------------

RunConfig defaults(const std::string& name, std::map<std::string, double> tolerances) {
  RunConfig c;
  c.experiment = name;
  c.big_r = -1;
  c.tolerances = std::move(tolerances);
  return c;
}

std::vector<ExperimentInfo> build_registry() {
  std::vector<ExperimentInfo> reg;
  auto add = [&](std::string name, std::string description, RunConfig c, ExperimentFn fn) {
    reg.push_back({std::move(name), std::move(description), std::move(c), std::move(fn)});
  };
  {
    RunConfig c = defaults("identity-suite", {{"residual", 1e-9}});
    c.n = 512;
    c.samples = 20;
    add("identity-suite",
        "Ward, Schur, Im-inverse, Poisson dual-route, tree fixed points, covariance "
        "eigen-equation and switching identities on d in {3,4,5} fixtures",
        c, identity_suite);
  }
  {
    RunConfig c = defaults("yl-expansion", {{"slope-half-width", 0.3}, {"derivative", 1e-6}});
    c.ell = 8;
    c.samples = 1;
    add("yl-expansion", "cubic remainder order and derivative of Y_ell at m_sc for ell <= 8", c,
        yl_expansion);
  }
  {
    RunConfig c = defaults("exchangeability", {{"p-floor", 0.01}, {"control-p-ceiling", 1e-3}});
    c.n = 8;
    c.ell = 0;
    c.big_r = 0;
    c.centers = 1;
    c.samples = 1;
    add("exchangeability",
        "class law of T_S(G) at n = 8 against the exact uniform law, with a biased control", c,
        exchangeability);
  }
  {
    RunConfig c = defaults("gaussian-wave-cov",
                           {{"depth-0", 0.1}, {"depth-1", 0.05}, {"depth-2", 0.05},
                            {"fourth-moment", 0.3}});
    add("gaussian-wave-cov",
        "depth-class covariances and fourth moment of sqrt(N) u_2 against the edge Gaussian wave",
        c, gaussian_wave_cov);
  }
  {
    RunConfig c = defaults("tw1-edge", {{"ks-distance", 0.15}});
    c.n = 2000;
    c.samples = 200;
    c.centers = 1;
    add("tw1-edge", "KS distance of rescaled lambda_2 against the beta = 1 tridiagonal edge", c,
        tw1_edge);
  }
  {
    RunConfig c = defaults("independence", {{"slack", 0.05}});
    c.centers = 4;
    add("independence", "correlation of rescaled lambda_2 with N u_2(o)^2", c, independence);
  }
  {
    RunConfig c = defaults("rigidity", {{"pass-fraction", 0.9}});
    c.samples = 50;
    add("rigidity", "normalized deviation from classical locations against n^0.15", c, rigidity);
  }
  {
    RunConfig c = defaults("poisson-smoothing", {{"slope-floor", 0.8}});
    c.samples = 5;
    c.method = SpectralMethod::kDense;
    add("poisson-smoothing", "log-log slope of the Poisson smoothing discrepancy in y", c,
        poisson_smoothing);
  }
  {
    RunConfig c = defaults("switch-moment-exact", {{"residual", 1e-9}});
    c.n = 256;
    c.samples = 20;
    c.method = SpectralMethod::kDense;
    add("switch-moment-exact",
        "directed-edge mean and second-moment identities and the excluded-ball variant", c,
        switch_moment_exact);
  }
  {
    RunConfig c = defaults("local-law-scan", {{"scaled-bound", 5.0}});
    c.n = 2000;
    c.samples = 50;
    add("local-law-scan", "N eta |m_N - m_d| over an edge window of the spectral plane", c,
        local_law);
  }
  {
    RunConfig c = defaults("hs-decomposition", {{"ratio-bound", 10.0}});
    c.samples = 20;
    add("hs-decomposition",
        "linear statistic near the edge against its almost-analytic extension terms", c,
        hs_decomposition);
  }
  {
    RunConfig c = defaults("counting-functional", {{"stability-factor", 2.0}});
    c.samples = 20;
    add("counting-functional", "median of Y_N at n/2, n and 2n", c, counting);
  }
  {
    RunConfig c = defaults("wigner-reference",
                           {{"diagonal", 0.1}, {"offdiagonal", 0.05}, {"ks-distance", 0.15}});
    add("wigner-reference", "GOE baseline: eigenvector overlaps and top-eigenvalue KS", c,
        wigner_reference);
  }
  {
    RunConfig c = defaults("omega-bar", {{"binomial-sds", 4.0}});
    c.samples = 100;
    add("omega-bar", "frequency of the tree-like-neighborhood event at c = 0.3, omega = 1", c,
        omega_bar);
  }
  {
    RunConfig c = defaults("uniformity", {{"p-floor", 0.01}});
    c.n = 8;
    c.centers = 1;
    c.samples = 1;
    add("uniformity", "sampler class law at n = 8 against exhaustive enumeration", c, uniformity);
  }
  {
    RunConfig c = defaults("far-field", {{"success-floor", 0.9}});
    c.n = 4000;
    c.samples = 200;
    c.big_r = 1;
    add("far-field", "frequency of the far-field indicator for one resampling", c, far_field);
  }
  return reg;
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_registry() {
  static const std::vector<ExperimentInfo> registry = build_registry();
  return registry;
}

}  // namespace regwave
