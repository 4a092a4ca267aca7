#include "regwave/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <lapacke.h>

#include "regwave/errors.hpp"

extern "C" void openblas_set_num_threads(int);

namespace regwave {

namespace {

double perron_value(int d) { return d / std::sqrt(d - 1.0); }

Eigen::MatrixXd dense_h(const RegularGraph& g) {
  const double scale = 1.0 / std::sqrt(g.d() - 1.0);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(g.n(), g.n());
  for (Vertex u = 0; u < g.n(); ++u)
    for (Vertex v : g.neighbors(u)) h(u, v) = scale;
  return h;
}

void check_cap(const RegularGraph& g, int cap) {
  if (g.n() > cap)
    throw ParameterError("n = " + std::to_string(g.n()) + " exceeds the dense cap " +
                         std::to_string(cap) + "; use extreme_eigenpairs");
}

void require_full(const SpectralDecomposition& sd) {
  if (!sd.is_full() || sd.eigenvectors.cols() != sd.n)
    throw ParameterError("operation requires a full eigendecomposition");
}

void require_open(HalfPlanePoint z) {
  if (!(z.im() > 0.0)) throw DomainError("spectral parameter must have Im z > 0");
}

// Rows of U scaled by 1/(lambda_s - z): G_ij = W.row(i) . U.row(j).
Eigen::MatrixXcd weighted_rows(const SpectralDecomposition& sd, HalfPlanePoint z) {
  Eigen::VectorXcd w(sd.n);
  for (int s = 0; s < sd.n; ++s) w(s) = 1.0 / (sd.eigenvalues(s) - z.value());
  return sd.eigenvectors.cast<Complex>() * w.asDiagonal();
}

Eigen::MatrixXcd invert_checked(const Eigen::MatrixXcd& m, const char* what) {
  if (m.rows() == 0) return m;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
  if (!(lu.rcond() > 1e-14)) throw NumericalError(std::string(what) + " is singular");
  return lu.inverse();
}

Eigen::MatrixXcd shifted_h(const RegularGraph& g, HalfPlanePoint z) {
  Eigen::MatrixXcd m = dense_h(g).cast<Complex>();
  m.diagonal().array() -= z.value();
  return m;
}

Eigen::MatrixXcd select(const Eigen::MatrixXcd& m, const std::vector<int>& rows,
                        const std::vector<int>& cols) {
  Eigen::MatrixXcd out(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = m(rows[a], cols[b]);
  return out;
}

}  // namespace

int SpectralDecomposition::column_of(int s) const {
  const auto it = std::find(indices.begin(), indices.end(), s);
  return it == indices.end() ? -1 : static_cast<int>(it - indices.begin());
}

Eigen::SparseMatrix<double> normalized_adjacency(const RegularGraph& g) {
  const double scale = 1.0 / std::sqrt(g.d() - 1.0);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(g.n()) * g.d());
  for (Vertex u = 0; u < g.n(); ++u)
    for (Vertex v : g.neighbors(u)) entries.emplace_back(u, v, scale);
  Eigen::SparseMatrix<double> h(g.n(), g.n());
  h.setFromTriplets(entries.begin(), entries.end());
  return h;
}

SpectralDecomposition eigendecompose(const RegularGraph& g, int dense_cap) {
  check_cap(g, dense_cap);
  // Single-threaded BLAS keeps results independent of the thread count.
  static const bool single_thread = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)single_thread;
  Eigen::MatrixXd a = dense_h(g);
  Eigen::VectorXd w(g.n());
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', g.n(), a.data(), g.n(), w.data());
  if (info != 0) throw NumericalError("dsyevd failed with info " + std::to_string(info));
  SpectralDecomposition sd;
  sd.n = g.n();
  sd.d = g.d();
  // LAPACK returns ascending order.
  sd.eigenvalues = w.reverse();
  sd.eigenvectors = a.rowwise().reverse();
  sd.indices.resize(g.n());
  std::iota(sd.indices.begin(), sd.indices.end(), 1);
  return sd;
}

SpectralDecomposition eigenvalues_only(const RegularGraph& g, int dense_cap) {
  check_cap(g, dense_cap);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense_h(g), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
  SpectralDecomposition sd;
  sd.n = g.n();
  sd.d = g.d();
  sd.eigenvalues = solver.eigenvalues().reverse();
  sd.indices.resize(g.n());
  std::iota(sd.indices.begin(), sd.indices.end(), 1);
  return sd;
}

LanczosResult lanczos_extreme(const MatVec& apply, int n, int k, SpectrumSide side,
                              const Eigen::MatrixXd& deflate, const LanczosOptions& options) {
  const int room = n - static_cast<int>(deflate.cols());
  if (k < 1 || k > room) throw ParameterError("requested eigenpair count out of range");
  const int max_iter = std::min(room, options.max_iterations > 0 ? options.max_iterations : 600);
  const int check_every = std::max(1, options.check_every);

  Rng rng(options.seed);
  std::normal_distribution<double> normal;
  auto orthogonalize = [&](Eigen::VectorXd& v, const Eigen::MatrixXd& basis, int used) {
    // Two passes of classical Gram-Schmidt.
    for (int pass = 0; pass < 2; ++pass) {
      if (deflate.cols() > 0) v -= deflate * (deflate.transpose() * v);
      if (used > 0) v -= basis.leftCols(used) * (basis.leftCols(used).transpose() * v);
    }
  };
  auto fresh_vector = [&](const Eigen::MatrixXd& basis, int used) -> Eigen::VectorXd {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::VectorXd v(n);
      for (int i = 0; i < n; ++i) v(i) = normal(rng);
      orthogonalize(v, basis, used);
      const double norm = v.norm();
      if (norm > 1e-8) return v / norm;
    }
    throw NumericalError("Lanczos could not find a new start direction");
  };

  Eigen::MatrixXd basis(n, max_iter + 1);
  std::vector<double> alpha, beta;
  basis.col(0) = fresh_vector(basis, 0);
  Eigen::VectorXd w(n);

  Eigen::VectorXd ritz_values;
  Eigen::MatrixXd ritz_coeffs;
  Eigen::VectorXd estimates;
  int m = 0;
  bool converged = false;
  for (m = 1; m <= max_iter; ++m) {
    apply(basis.col(m - 1), w);
    const double a = basis.col(m - 1).dot(w);
    alpha.push_back(a);
    orthogonalize(w, basis, m);
    double b = w.norm();

    const bool last = (m == max_iter);
    bool restarted = false;
    if (!last) {
      if (b < 1e-10) {
        restarted = true;
        // Invariant subspace reached; restart in the orthogonal complement.
        b = 0.0;
        basis.col(m) = fresh_vector(basis, m);
      } else {
        basis.col(m) = w / b;
      }
      beta.push_back(b);
    }

    // A restart leaves the new block unexplored, so no test right after it.
    if (m < k || restarted || (m % check_every != 0 && !last)) continue;

    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) t(i, i) = alpha[i];
    for (int i = 0; i + 1 < m; ++i) t(i, i + 1) = t(i + 1, i) = beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri(t);
    ritz_values = tri.eigenvalues();
    ritz_coeffs = tri.eigenvectors();
    if (side == SpectrumSide::kTop) {
      ritz_values = ritz_values.reverse().eval();
      ritz_coeffs = ritz_coeffs.rowwise().reverse().eval();
    }
    // Residual of Ritz pair j is |b * last coefficient|.
    const double tail = last ? b : beta[m - 1];
    estimates = (tail * ritz_coeffs.row(m - 1).head(k).transpose()).cwiseAbs();
    if (estimates.maxCoeff() < options.tolerance) {
      converged = true;
      break;
    }
    if (last) break;
  }
  m = std::min(m, max_iter);

  LanczosResult result;
  result.iterations = m;
  result.values = ritz_values.head(k);
  result.vectors = basis.leftCols(m) * ritz_coeffs.leftCols(k);
  result.residuals.resize(k);
  for (int j = 0; j < k; ++j) {
    result.vectors.col(j).normalize();
    apply(result.vectors.col(j), w);
    result.residuals(j) = (w - result.values(j) * result.vectors.col(j)).norm();
  }
  // The Krylov space may be exhausted (m == room) with tiny true residuals.
  if (!converged && result.residuals.maxCoeff() > std::max(options.tolerance, 1e-8)) {
    std::ostringstream msg;
    msg << "Lanczos did not converge: " << m << " iterations, max residual "
        << result.residuals.maxCoeff() << ", tolerance " << options.tolerance;
    throw NumericalError(msg.str());
  }
  return result;
}

SpectralDecomposition extreme_eigenpairs(const RegularGraph& g, int k, SpectrumSide side,
                                         LanczosOptions options) {
  const int n = g.n();
  if (k < 1 || k > n - 1) throw ParameterError("k must lie in [1, n-1]");
  const Eigen::SparseMatrix<double> h = normalized_adjacency(g);
  const MatVec apply = [&h](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = h * x; };

  SpectralDecomposition sd;
  sd.n = n;
  sd.d = g.d();
  if (side == SpectrumSide::kTop) {
    const Eigen::MatrixXd ones = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(n));
    const LanczosResult r = lanczos_extreme(apply, n, k, side, ones, options);
    sd.eigenvalues.resize(k + 1);
    sd.eigenvectors.resize(n, k + 1);
    sd.eigenvalues(0) = perron_value(g.d());
    sd.eigenvectors.col(0) = ones;
    sd.eigenvalues.tail(k) = r.values;
    sd.eigenvectors.rightCols(k) = r.vectors;
    sd.indices.resize(k + 1);
    std::iota(sd.indices.begin(), sd.indices.end(), 1);
  } else {
    const LanczosResult r = lanczos_extreme(apply, n, k, side, Eigen::MatrixXd(n, 0), options);
    // r.values ascend from the bottom; store descending.
    sd.eigenvalues = r.values.reverse();
    sd.eigenvectors = r.vectors.rowwise().reverse();
    sd.indices.resize(k);
    std::iota(sd.indices.begin(), sd.indices.end(), n - k + 1);
  }
  return sd;
}

Eigen::MatrixXcd green_matrix(const SpectralDecomposition& sd, HalfPlanePoint z) {
  require_full(sd);
  require_open(z);
  return weighted_rows(sd, z) * sd.eigenvectors.transpose().cast<Complex>();
}

Complex green_entry(const SpectralDecomposition& sd, int i, int j, HalfPlanePoint z) {
  require_full(sd);
  require_open(z);
  Complex sum = 0.0;
  for (int s = 0; s < sd.n; ++s)
    sum += sd.eigenvectors(i, s) * sd.eigenvectors(j, s) / (sd.eigenvalues(s) - z.value());
  return sum;
}

Eigen::VectorXcd green_column_direct(const RegularGraph& g, int j, HalfPlanePoint z) {
  require_open(z);
  if (j < 0 || j >= g.n()) throw ParameterError("column index out of range");
  Eigen::SparseMatrix<Complex> m = normalized_adjacency(g).cast<Complex>();
  for (int i = 0; i < g.n(); ++i) m.coeffRef(i, i) -= z.value();
  m.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success) throw NumericalError("sparse LU of H - z failed");
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(g.n());
  rhs(j) = 1.0;
  Eigen::VectorXcd col = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw NumericalError("sparse solve of H - z failed");
  return col;
}

Complex stieltjes_empirical(const Eigen::VectorXd& eigenvalues, HalfPlanePoint z) {
  require_open(z);
  // 1/(a - i eta) = (a + i eta)/(a^2 + eta^2) with a = lambda - Re z.
  const double eta = z.im(), eta2 = eta * eta;
  double re = 0.0, im = 0.0;
  for (double lambda : eigenvalues) {
    const double a = lambda - z.re(), inv = 1.0 / (a * a + eta2);
    re += a * inv;
    im += inv;
  }
  const double n = static_cast<double>(eigenvalues.size());
  return {re / n, eta * im / n};
}

StieltjesQ stieltjes_and_q(const SpectralDecomposition& sd, const RegularGraph& g,
                           HalfPlanePoint z) {
  require_full(sd);
  require_open(z);
  if (g.n() != sd.n) throw ParameterError("graph and decomposition sizes differ");
  const Eigen::MatrixXcd w = weighted_rows(sd, z);
  const Eigen::MatrixXcd u = sd.eigenvectors.cast<Complex>();
  auto entry = [&](int i, int j) { return (w.row(i).array() * u.row(j).array()).sum(); };

  Eigen::VectorXcd diag(sd.n);
  for (int i = 0; i < sd.n; ++i) diag(i) = entry(i, i);
  StieltjesQ out;
  out.m_n = stieltjes_empirical(sd.eigenvalues, z);
  Complex q = 0.0;
  for (const auto& [i, j] : g.edges()) {
    if (std::abs(diag(i)) < 1e-12 || std::abs(diag(j)) < 1e-12)
      throw NumericalError("vanishing diagonal Green entry in edge reduction");
    const Complex gij = entry(i, j);
    // G symmetric: both orientations share G_ij G_ji = G_ij^2.
    q += diag(i) - gij * gij / diag(j);
    q += diag(j) - gij * gij / diag(i);
  }
  out.q = q / (static_cast<double>(g.d()) * sd.n);
  return out;
}

double schur_identity_check(const SpectralDecomposition& sd, const RegularGraph& g,
                            const std::vector<int>& subset, HalfPlanePoint z) {
  require_full(sd);
  require_open(z);
  std::vector<int> t = subset;
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  if (t.empty()) return 0.0;
  for (int v : t)
    if (v < 0 || v >= g.n()) throw ParameterError("vertex out of range");
  std::vector<int> rest;
  for (int v = 0, p = 0; v < g.n(); ++v) {
    if (p < static_cast<int>(t.size()) && t[p] == v) {
      ++p;
      continue;
    }
    rest.push_back(v);
  }

  const Eigen::MatrixXcd green = green_matrix(sd, z);
  const Eigen::MatrixXcd hz = shifted_h(g, z);
  const Eigen::MatrixXcd a = select(hz, t, t);        // H_TT - z
  const Eigen::MatrixXcd b = select(hz, t, rest);     // H_{T,T^c}
  const Eigen::MatrixXcd minor = invert_checked(select(hz, rest, rest), "minor");

  double residual = 0.0;
  const Eigen::MatrixXcd g_tt = invert_checked(a - b * minor * b.transpose(), "Schur complement");
  residual = std::max(residual, (select(green, t, t) - g_tt).cwiseAbs().maxCoeff());
  if (!rest.empty()) {
    const Eigen::MatrixXcd g_tr = -g_tt * b * minor;
    residual = std::max(residual, (select(green, t, rest) - g_tr).cwiseAbs().maxCoeff());
    const Eigen::MatrixXcd g_rr = minor + minor * b.transpose() * g_tt * b * minor;
    residual = std::max(residual, (select(green, rest, rest) - g_rr).cwiseAbs().maxCoeff());
  }

  // Rank-one removal of the first vertex of T.
  const int k = t.front();
  std::vector<int> others;
  for (int v = 0; v < g.n(); ++v)
    if (v != k) others.push_back(v);
  if (!others.empty()) {
    const Eigen::MatrixXcd direct = invert_checked(select(hz, others, others), "rank-one minor");
    if (std::abs(green(k, k)) < 1e-12) throw NumericalError("vanishing G_kk");
    for (std::size_t p = 0; p < others.size(); ++p)
      for (std::size_t q = 0; q < others.size(); ++q) {
        const int i = others[p], j = others[q];
        const Complex reduced = green(i, j) - green(i, k) * green(k, j) / green(k, k);
        residual = std::max(residual, std::abs(reduced - direct(p, q)));
      }
  }
  return residual;
}

double im_inverse_identity_check(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) throw ParameterError("matrix must be square");
  const Eigen::MatrixXcd inv = invert_checked(m, "matrix");
  const Eigen::MatrixXcd im_m = m.imag().cast<Complex>();
  const Eigen::MatrixXcd rhs = -inv * im_m * inv.conjugate();
  return (inv.imag().cast<Complex>() - rhs).cwiseAbs().maxCoeff();
}

double ward_identity_check(const Eigen::MatrixXcd& green, double eta) {
  if (!(eta > 0.0)) throw DomainError("eta must be positive");
  double residual = 0.0;
  for (int i = 0; i < green.rows(); ++i) {
    const double lhs = green.row(i).squaredNorm();
    residual = std::max(residual, std::abs(lhs - green(i, i).imag() / eta));
  }
  return residual;
}

double edge_rescale(double lambda, int n, int d) {
  if (d == 2) throw DomainError("edge rescaling is undefined for d = 2");
  return std::pow(edge_constant(d) * n, 2.0 / 3.0) * (lambda - 2.0);
}

double rescaled_im_green(const SpectralDecomposition& sd, int i, int j, HalfPlanePoint w) {
  require_full(sd);
  require_open(w);
  double sum = 0.0;
  for (int s = 0; s < sd.n; ++s) {
    const double x = edge_rescale(sd.eigenvalues(s), sd.n, sd.d) - w.re();
    sum += sd.eigenvectors(i, s) * sd.eigenvectors(j, s) / (x * x + w.im() * w.im());
  }
  return w.im() * sd.n * sum;
}

double rescaled_im_green_direct(const RegularGraph& g, int i, int j, HalfPlanePoint w) {
  require_open(w);
  const double a = edge_constant(g.d());
  const double scale = std::pow(a * g.n(), 2.0 / 3.0);
  const HalfPlanePoint z(2.0 + w.re() / scale, w.im() / scale);
  const Complex gij = green_column_direct(g, j, z)(i);
  return std::cbrt(static_cast<double>(g.n())) / std::pow(a, 2.0 / 3.0) * gij.imag();
}

std::string spectrum_csv(const SpectralDecomposition& sd) {
  std::ostringstream out;
  out.precision(17);
  out << "index,eigenvalue\n";
  for (int c = 0; c < sd.eigenvalues.size(); ++c)
    out << sd.indices[c] << ',' << sd.eigenvalues(c) << '\n';
  return out.str();
}

std::string ball_restriction_csv(const SpectralDecomposition& sd, int s, const TreeBall& ball) {
  const int c = sd.column_of(s);
  if (c < 0 || sd.eigenvectors.cols() <= c) throw ParameterError("eigenvector not available");
  std::ostringstream out;
  out.precision(17);
  out << "vertex,depth,value\n";
  const double root_n = std::sqrt(static_cast<double>(sd.n));
  for (int p = 0; p < ball.size(); ++p)
    out << ball.vertices[p] << ',' << ball.depth[p] << ','
        << root_n * sd.eigenvectors(ball.vertices[p], c) << '\n';
  return out.str();
}

}  // namespace regwave
