#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "regwave/graph.hpp"
#include "regwave/random.hpp"
#include "regwave/tree_green.hpp"

namespace regwave {

// Eigenpairs of H = A / sqrt(d-1), eigenvalues descending. `indices` holds
// the 1-based spectral position of each column (1..n for a full
// decomposition; a subset for partial ones).
struct SpectralDecomposition {
  int n = 0;
  int d = 0;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  std::vector<int> indices;

  bool is_full() const { return eigenvalues.size() == n; }
  // Column of spectral index s, or -1.
  int column_of(int s) const;
};

constexpr int kDenseCap = 4096;

// Sparse matrix H = A / sqrt(d-1).
Eigen::SparseMatrix<double> normalized_adjacency(const RegularGraph& g);

SpectralDecomposition eigendecompose(const RegularGraph& g, int dense_cap = kDenseCap);
// Eigenvalues only (no eigenvectors stored).
SpectralDecomposition eigenvalues_only(const RegularGraph& g, int dense_cap = kDenseCap);

enum class SpectrumSide { kTop, kBottom };

struct LanczosOptions {
  double tolerance = 1e-9;   // residual norm for accepted Ritz pairs
  int max_iterations = 0;    // 0 -> min(n, 600)
  int check_every = 10;
  std::uint64_t seed = 0x5eed;
};

using MatVec = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LanczosResult {
  Eigen::VectorXd values;    // ordered from the requested extreme inward
  Eigen::MatrixXd vectors;
  Eigen::VectorXd residuals;
  int iterations = 0;
};

// Lanczos with full reorthogonalization for the k most extreme eigenpairs
// of a symmetric operator restricted to the orthogonal complement of the
// `deflate` columns (assumed orthonormal).
LanczosResult lanczos_extreme(const MatVec& apply, int n, int k, SpectrumSide side,
                              const Eigen::MatrixXd& deflate, const LanczosOptions& options);

// Top (or bottom) k eigenpairs of H excluding the Perron pair, which is
// inserted analytically for the top side: columns then carry indices
// 1..k+1. Bottom side carries indices n-k+1..n (descending order).
SpectralDecomposition extreme_eigenpairs(const RegularGraph& g, int k,
                                         SpectrumSide side = SpectrumSide::kTop,
                                         LanczosOptions options = {});

// G(z) = (H - z)^{-1} from a full decomposition.
Eigen::MatrixXcd green_matrix(const SpectralDecomposition& sd, HalfPlanePoint z);
// Single entry G_ij(z) from the spectral sum.
Complex green_entry(const SpectralDecomposition& sd, int i, int j, HalfPlanePoint z);

// Column G(z) e_j by sparse LU of H - z (independent of any eigensolver).
Eigen::VectorXcd green_column_direct(const RegularGraph& g, int j, HalfPlanePoint z);

struct StieltjesQ {
  Complex m_n;
  Complex q;
};

// m_N = Tr G / N and Q = (1/dN) sum over directed edges (i,j) of G^{(j)}_ii,
// with G^{(j)}_ii = G_ii - G_ij G_ji / G_jj.
StieltjesQ stieltjes_and_q(const SpectralDecomposition& sd, const RegularGraph& g,
                           HalfPlanePoint z);

Complex stieltjes_empirical(const Eigen::VectorXd& eigenvalues, HalfPlanePoint z);

// Maximum entrywise residual of the block Schur complement identities for
// the vertex set T, plus the rank-one removal identity for one k in T.
double schur_identity_check(const SpectralDecomposition& sd, const RegularGraph& g,
                            const std::vector<int>& subset, HalfPlanePoint z);

// Residual of Im[M^{-1}] = -M^{-1} Im[M] conj(M^{-1}).
double im_inverse_identity_check(const Eigen::MatrixXcd& m);

// max_i | sum_j |G_ij|^2 - Im G_ii / eta |.
double ward_identity_check(const Eigen::MatrixXcd& green, double eta);

// N^{1/3} A^{-2/3} Im G_ij(2 + w (A N)^{-2/3}) evaluated as the Poisson sum
// over the spectrum.
double rescaled_im_green(const SpectralDecomposition& sd, int i, int j, HalfPlanePoint w);
// Same quantity from a direct resolvent solve.
double rescaled_im_green_direct(const RegularGraph& g, int i, int j, HalfPlanePoint w);

// (A n)^{2/3} (lambda - 2) with A = d(d-1)/(d-2)^2.
double edge_rescale(double lambda, int n, int d);

std::string spectrum_csv(const SpectralDecomposition& sd);
// Rows: vertex, depth, sqrt(N) u_s(vertex) over a ball.
std::string ball_restriction_csv(const SpectralDecomposition& sd, int s, const TreeBall& ball);

}  // namespace regwave
