#include "regwave/tree_green.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "regwave/errors.hpp"
#include "regwave/quadrature.hpp"
#include "regwave/stats.hpp"

namespace regwave {

namespace {

void require_degree(int d) {
  if (d < 3) throw DomainError("degree must be at least 3");
}

Complex decay_factor(HalfPlanePoint z, int d) { return -m_sc(z) / std::sqrt(d - 1.0); }

}  // namespace

HalfPlanePoint::HalfPlanePoint(double re, double im) : re_(re), im_(im) {
  if (!(im >= 0.0) || !std::isfinite(re) || !std::isfinite(im))
    throw DomainError("spectral parameter must lie in the closed upper half plane");
}

Complex m_sc(HalfPlanePoint z) {
  const Complex w = z.value();
  // Principal roots of z-2 and z+2 both have arguments in [0, pi/2] on the
  // closed upper half plane, which selects the branch decaying at infinity.
  return 0.5 * (-w + std::sqrt(w - 2.0) * std::sqrt(w + 2.0));
}

Complex m_d(HalfPlanePoint z, int d) {
  require_degree(d);
  return 1.0 / (-z.value() - (d / (d - 1.0)) * m_sc(z));
}

Complex m_d_closed_form(HalfPlanePoint z, int d) {
  require_degree(d);
  const Complex w = z.value();
  const Complex root = std::sqrt(w - 2.0) * std::sqrt(w + 2.0);
  return (d - 1.0) * (-(d - 2.0) * w + static_cast<double>(d) * root) /
         (2.0 * (static_cast<double>(d) * d - (d - 1.0) * w * w));
}

double edge_constant(int d) {
  if (d <= 2) throw DomainError("edge constant requires d > 2");
  return d * (d - 1.0) / ((d - 2.0) * (d - 2.0));
}

double rho_d(double x, int d) {
  require_degree(d);
  if (x <= -2.0 || x >= 2.0) return 0.0;
  return std::sqrt(4.0 - x * x) / (2.0 * std::numbers::pi) /
         (1.0 + 1.0 / (d - 1.0) - x * x / d);
}

namespace {

// Mass above 2cos(theta), integrated in the angle variable where the
// square-root edge becomes smooth.
double upper_mass_angle(double theta, int d) {
  const auto integrand = [d](double t) {
    const double c = std::cos(t), s = std::sin(t);
    return 2.0 * s * s / std::numbers::pi / (1.0 + 1.0 / (d - 1.0) - 4.0 * c * c / d);
  };
  return AdaptiveSimpson(1e-15)(integrand, 0.0, theta);
}

}  // namespace

double kesten_mckay_upper_mass(double x, int d) {
  require_degree(d);
  if (x >= 2.0) return 0.0;
  if (x <= -2.0) return 1.0;
  return upper_mass_angle(std::acos(x / 2.0), d);
}

std::vector<double> classical_locations(int n, int d) {
  require_degree(d);
  if (n < 3) throw ParameterError("classical locations need n >= 3");
  const auto integrand = [d](double t) {
    const double c = std::cos(t), s = std::sin(t);
    return 2.0 * s * s / std::numbers::pi / (1.0 + 1.0 / (d - 1.0) - 4.0 * c * c / d);
  };
  const AdaptiveSimpson quad(1e-15);
  std::vector<double> out;
  out.reserve(n - 1);
  // Sweep the angle upward, carrying the mass already accumulated so every
  // bisection step only integrates over a short interval.
  double base_theta = 0.0, base_mass = 0.0;
  for (int i = 2; i <= n; ++i) {
    const double target = (i - 0.5) / (n - 1.0);
    if (target >= 1.0) {
      // No solution past the full mass; pin to the lower spectral edge.
      out.push_back(-2.0);
      continue;
    }
    double step = std::numbers::pi / n;
    double hi = std::min(base_theta + step, std::numbers::pi);
    while (hi < std::numbers::pi && base_mass + quad(integrand, base_theta, hi) < target) {
      step *= 2.0;
      hi = std::min(base_theta + step, std::numbers::pi);
    }
    double lo = base_theta;
    double lo_mass = base_mass;
    while (hi - lo > 1e-13) {
      const double mid = 0.5 * (lo + hi);
      const double mass = lo_mass + quad(integrand, lo, mid);
      if (mass < target) {
        lo = mid;
        lo_mass = mass;
      } else {
        hi = mid;
      }
    }
    base_theta = lo;
    base_mass = lo_mass;
    out.push_back(2.0 * std::cos(0.5 * (lo + hi)));
  }
  return out;
}

Complex tree_green_regular(int r, HalfPlanePoint z, int d) {
  if (r < 0) throw ParameterError("distance must be nonnegative");
  return m_d(z, d) * std::pow(decay_factor(z, d), r);
}

Complex tree_green_ary(int dist, int anc, HalfPlanePoint z, int d) {
  if (dist < 0 || anc < 0) throw ParameterError("distance and ancestor depth must be nonnegative");
  const Complex q = decay_factor(z, d);
  return m_d(z, d) * (1.0 - std::pow(q, 2 * anc + 2)) * std::pow(q, dist);
}

LocalGraph local_graph(const TreeBall& ball, int d) {
  LocalGraph g;
  g.d = d;
  g.size = ball.size();
  g.edges = ball.local_edges;
  g.target_degree.assign(g.size, d);
  return g;
}

LocalGraph ary_local_graph(int d, int radius) {
  LocalGraph g = local_graph(ary_tree_ball(d, radius), d);
  g.target_degree[0] = d - 1;
  return g;
}

namespace {

std::vector<int> degrees(const LocalGraph& graph) {
  std::vector<int> deg(graph.size, 0);
  for (auto [a, b] : graph.edges) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

void check_local(const LocalGraph& graph) {
  if (graph.d < 3) throw DomainError("degree must be at least 3");
  if (static_cast<int>(graph.target_degree.size()) != graph.size)
    throw ParameterError("target degree list does not match graph size");
}

}  // namespace

Eigen::MatrixXcd p_weighted(const LocalGraph& graph, HalfPlanePoint z, Complex delta,
                            const std::vector<int>& removed) {
  check_local(graph);
  std::vector<int> index(graph.size, 0);
  for (int r : removed) {
    if (r < 0 || r >= graph.size) throw ParameterError("removed vertex out of range");
    index[r] = -1;
  }
  int kept = 0;
  for (int& k : index)
    if (k == 0) k = kept++;

  const std::vector<int> deg = degrees(graph);
  const double scale = 1.0 / std::sqrt(graph.d - 1.0);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(kept, kept);
  for (int v = 0; v < graph.size; ++v) {
    if (index[v] < 0) continue;
    m(index[v], index[v]) =
        -z.value() - static_cast<double>(graph.target_degree[v] - deg[v]) * delta / (graph.d - 1.0);
  }
  for (auto [a, b] : graph.edges) {
    if (index[a] < 0 || index[b] < 0) continue;
    m(index[a], index[b]) += scale;
    m(index[b], index[a]) += scale;
  }
  if (kept == 0) return m;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
  if (!(lu.rcond() > 1e-14)) throw NumericalError("tree extension system is singular");
  return lu.inverse();
}

Eigen::VectorXcd p_weighted_column(const LocalGraph& graph, HalfPlanePoint z, Complex delta,
                                   int source) {
  check_local(graph);
  if (source < 0 || source >= graph.size) throw ParameterError("source out of range");
  const std::vector<int> deg = degrees(graph);
  const double scale = 1.0 / std::sqrt(graph.d - 1.0);
  std::vector<Eigen::Triplet<Complex>> entries;
  entries.reserve(graph.size + 2 * graph.edges.size());
  for (int v = 0; v < graph.size; ++v)
    entries.emplace_back(
        v, v,
        -z.value() - static_cast<double>(graph.target_degree[v] - deg[v]) * delta / (graph.d - 1.0));
  for (auto [a, b] : graph.edges) {
    entries.emplace_back(a, b, scale);
    entries.emplace_back(b, a, scale);
  }
  Eigen::SparseMatrix<Complex> m(graph.size, graph.size);
  m.setFromTriplets(entries.begin(), entries.end());
  m.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success) throw NumericalError("sparse LU of tree extension failed");
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(graph.size);
  rhs(source) = 1.0;
  Eigen::VectorXcd col = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw NumericalError("sparse solve of tree extension failed");
  return col;
}

Complex y_ell(Complex delta, HalfPlanePoint z, int ell) {
  if (ell < 0) throw ParameterError("ell must be nonnegative");
  Complex g = delta;
  for (int k = 0; k <= ell; ++k) g = 1.0 / (-z.value() - g);
  return g;
}

Complex x_ell(Complex delta, HalfPlanePoint z, int ell, int d) {
  if (ell < 0) throw ParameterError("ell must be nonnegative");
  require_degree(d);
  Complex g = delta;
  for (int k = 0; k < ell; ++k) g = 1.0 / (-z.value() - g);
  return 1.0 / (-z.value() - (d / (d - 1.0)) * g);
}

Complex y_ell_deviation(Complex h, HalfPlanePoint z, int ell) {
  if (ell < 0) throw ParameterError("ell must be nonnegative");
  const Complex m = m_sc(z);
  Complex e = h;
  for (int k = 0; k <= ell; ++k) e = m * m * e / (1.0 - m * e);
  return e;
}

Complex y_ell_linear_coefficient(HalfPlanePoint z, int ell) {
  if (ell < 0) throw ParameterError("ell must be nonnegative");
  return std::pow(m_sc(z), 2 * ell + 2);
}

Complex y_ell_quadratic_coefficient(HalfPlanePoint z, int ell, int d) {
  if (ell < 0) throw ParameterError("ell must be nonnegative");
  const Complex m = m_sc(z);
  const Complex p = std::pow(m, 2 * ell + 2);
  return p * m_d(z, d) *
         ((1.0 - p) / (d - 1.0) + (d - 2.0) / (d - 1.0) * (1.0 - p) / (1.0 - m * m));
}

Complex x_ell_linear_coefficient(HalfPlanePoint z, int ell, int d) {
  if (ell < 0) throw ParameterError("ell must be nonnegative");
  const Complex md = m_d(z, d);
  return d / (d - 1.0) * md * md * std::pow(m_sc(z), 2 * ell);
}

ExpansionStudy y_ell_expansion_study(HalfPlanePoint z, int ell, int d,
                                     const std::vector<double>& offsets, double phi,
                                     double fd_step) {
  if (offsets.size() < 2) throw ParameterError("need at least two offsets");
  const Complex m = m_sc(z);
  const Complex c1 = y_ell_linear_coefficient(z, ell);
  const Complex c2 = y_ell_quadratic_coefficient(z, ell, d);
  const Complex dir = std::polar(1.0, phi);
  ExpansionStudy study;
  for (double h : offsets) {
    if (!(h > 0.0)) throw ParameterError("offsets must be positive");
    const Complex step = h * dir;
    const double rem = std::abs(y_ell_deviation(step, z, ell) - c1 * step - c2 * step * step);
    study.offsets.push_back(h);
    study.remainders.push_back(rem);
  }
  study.slope = loglog_slope(study.offsets, study.remainders);
  const Complex fd = (y_ell(m + fd_step * dir, z, ell) - y_ell(m - fd_step * dir, z, ell)) /
                     (2.0 * fd_step * dir);
  study.derivative_error = std::abs(fd - c1);
  return study;
}

double chebyshev_u(int r, double theta) {
  if (r < -2) throw ParameterError("Chebyshev index must be >= -2");
  if (r == -2) return -1.0;
  double prev = 0.0, cur = 1.0;  // U_{-1}, U_0
  for (int k = 0; k < r; ++k) {
    const double next = 2.0 * theta * cur - prev;
    prev = cur;
    cur = next;
  }
  return r == -1 ? 0.0 : cur;
}

double wave_covariance_entry(int d, double lambda, int r) {
  require_degree(d);
  if (r < 0) throw ParameterError("distance must be nonnegative");
  const double theta = lambda / (2.0 * std::sqrt(d - 1.0));
  return std::pow(d - 1.0, -0.5 * r) *
         ((d - 1.0) / d * chebyshev_u(r, theta) - chebyshev_u(r - 2, theta) / d);
}

Eigen::MatrixXi ball_distances(const TreeBall& ball) {
  const int n = ball.size();
  std::vector<std::vector<int>> adj(n);
  for (auto [a, b] : ball.local_edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  Eigen::MatrixXi dist = Eigen::MatrixXi::Constant(n, n, -1);
  std::vector<int> queue;
  for (int s = 0; s < n; ++s) {
    queue.assign(1, s);
    dist(s, s) = 0;
    for (std::size_t h = 0; h < queue.size(); ++h)
      for (int w : adj[queue[h]])
        if (dist(s, w) < 0) {
          dist(s, w) = dist(s, queue[h]) + 1;
          queue.push_back(w);
        }
  }
  return dist;
}

WaveCovariance wave_covariance(int d, double lambda, const TreeBall& ball) {
  require_degree(d);
  if (!ball.is_tree) throw DomainError("Gaussian wave covariance needs a tree ball");
  if (std::abs(lambda) > d) throw DomainError("lambda must satisfy |lambda| <= d");
  const Eigen::MatrixXi dist = ball_distances(ball);
  const int n = ball.size();
  std::vector<double> by_distance;
  WaveCovariance cov{d, lambda, ball, Eigen::MatrixXd(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int r = dist(i, j);
      if (r < 0) throw DomainError("ball is not connected");
      while (static_cast<int>(by_distance.size()) <= r)
        by_distance.push_back(wave_covariance_entry(d, lambda, static_cast<int>(by_distance.size())));
      cov.matrix(i, j) = by_distance[r];
    }
  return cov;
}

std::string to_csv(const WaveCovariance& cov) {
  std::ostringstream os;
  os.precision(17);
  os << "row,col,value\n";
  for (int i = 0; i < cov.ball.size(); ++i)
    for (int j = 0; j < cov.ball.size(); ++j)
      os << cov.ball.vertices[i] << ',' << cov.ball.vertices[j] << ',' << cov.matrix(i, j) << '\n';
  return os.str();
}

Eigen::VectorXd sample_gaussian_wave(const WaveCovariance& cov, Rng& rng) {
  // The interior eigen-equation makes the covariance singular, so factor it
  // through its spectrum instead of a plain Cholesky.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.matrix);
  if (eig.info() != Eigen::Success) throw NumericalError("covariance eigensolver failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, values.cwiseAbs().maxCoeff());
  if (values.size() > 0 && values.minCoeff() < -tol)
    throw DomainError("covariance is not positive semidefinite");
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(values.size());
  for (Eigen::Index k = 0; k < xi.size(); ++k) xi(k) = std::sqrt(std::max(values(k), 0.0)) * normal(rng);
  return eig.eigenvectors() * xi;
}

}  // namespace regwave
