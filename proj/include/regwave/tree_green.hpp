#pragma once

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "regwave/graph.hpp"
#include "regwave/random.hpp"

namespace regwave {

using Complex = std::complex<double>;

// Spectral parameter z with Im z >= 0. Im z = 0 is accepted as the boundary
// limit for the closed-form transforms; solves require Im z > 0.
class HalfPlanePoint {
 public:
  HalfPlanePoint(double re, double im);
  HalfPlanePoint(Complex z) : HalfPlanePoint(z.real(), z.imag()) {}  // NOLINT(implicit)

  double re() const { return re_; }
  double im() const { return im_; }
  Complex value() const { return {re_, im_}; }
  operator Complex() const { return value(); }  // NOLINT(implicit)

 private:
  double re_;
  double im_;
};

// Semicircle Stieltjes transform (-z + sqrt(z^2 - 4)) / 2, branch with
// Im m_sc > 0 on the upper half plane and m_sc -> 0 at infinity.
Complex m_sc(HalfPlanePoint z);

// Kesten-McKay Stieltjes transform, 1 / (-z - d/(d-1) m_sc(z)).
Complex m_d(HalfPlanePoint z, int d);
// Second closed form (d-1)(-(d-2)z + d sqrt(z^2-4)) / (2(d^2 - (d-1)z^2)).
Complex m_d_closed_form(HalfPlanePoint z, int d);

// Edge constant d(d-1)/(d-2)^2.
double edge_constant(int d);

// Kesten-McKay density of the normalized adjacency spectrum.
double rho_d(double x, int d);

// Mass of rho_d on [x, 2].
double kesten_mckay_upper_mass(double x, int d);

// gamma_2 .. gamma_n (index i at position i-2): mass of rho_d above gamma_i
// equals (i - 1/2)/(n - 1).
std::vector<double> classical_locations(int n, int d);

// Green's function of the infinite d-regular tree at graph distance r.
Complex tree_green_regular(int r, HalfPlanePoint z, int d);

// Green's function of the infinite (d-1)-ary tree between vertices at
// distance `dist` whose common ancestor sits at depth `anc`.
Complex tree_green_ary(int dist, int anc, HalfPlanePoint z, int d);

// Finite local graph with a target degree per vertex; the deficiency
// (target - degree) receives compensation weight Delta/(d-1).
struct LocalGraph {
  int d = 3;
  int size = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> target_degree;
};

// Local graph of a ball with every vertex targeting degree d.
LocalGraph local_graph(const TreeBall& ball, int d);
// Ball of the (d-1)-ary tree; the root targets degree d-1, the rest d.
LocalGraph ary_local_graph(int d, int radius);

// Dense inverse of -z + A/sqrt(d-1) - diag((target - deg) Delta/(d-1)) with
// the rows/columns of `removed` deleted first. Returned indices follow the
// kept vertices in ascending order.
Eigen::MatrixXcd p_weighted(const LocalGraph& graph, HalfPlanePoint z, Complex delta,
                            const std::vector<int>& removed = {});

// Single column of the same matrix by sparse LU, for balls too large for a
// dense inverse.
Eigen::VectorXcd p_weighted_column(const LocalGraph& graph, HalfPlanePoint z, Complex delta,
                                   int source);

// Root values of the weighted extension of the radius-ell ball of the
// (d-1)-ary tree (Y) and of the d-regular tree (X), by the scalar recursion
// g -> 1/(-z - g).
Complex y_ell(Complex delta, HalfPlanePoint z, int ell);
Complex x_ell(Complex delta, HalfPlanePoint z, int ell, int d);

// Y_ell(m_sc + h) - m_sc without cancellation, from the deviation
// recursion e -> m_sc^2 e / (1 - m_sc e) started at e = h.
Complex y_ell_deviation(Complex h, HalfPlanePoint z, int ell);

// Taylor data of Y_ell around its fixed point m_sc:
//   Y_ell(D) - m_sc = c1 (D - m_sc) + c2 (D - m_sc)^2 + O(ell^2 |D - m_sc|^3)
// with c1 = m_sc^{2 ell + 2} and
//   c2 = m_sc^{2 ell + 2} m_d ((1 - m_sc^{2 ell + 2})/(d-1)
//        + (d-2)/(d-1) (1 - m_sc^{2 ell + 2})/(1 - m_sc^2)).
Complex y_ell_linear_coefficient(HalfPlanePoint z, int ell);
Complex y_ell_quadratic_coefficient(HalfPlanePoint z, int ell, int d);
// X_ell(D) - m_d = d/(d-1) m_d^2 m_sc^{2 ell} (D - m_sc) + O(ell |D - m_sc|^2).
Complex x_ell_linear_coefficient(HalfPlanePoint z, int ell, int d);

struct ExpansionStudy {
  std::vector<double> offsets;     // |D - m_sc|
  std::vector<double> remainders;  // |Y - m_sc - c1 h - c2 h^2|
  double slope = 0.0;              // least-squares log-log slope
  double derivative_error = 0.0;   // |central difference - c1|
};

// Remainder of the quadratic expansion at D = m_sc + h e^{i phi} for each
// offset h, plus a central-difference derivative check with step fd_step.
ExpansionStudy y_ell_expansion_study(HalfPlanePoint z, int ell, int d,
                                     const std::vector<double>& offsets, double phi = 0.7,
                                     double fd_step = 1e-5);

// Second-kind Chebyshev U_r(theta) by three-term recurrence, with
// U_{-1} = 0 and U_{-2} = -1.
double chebyshev_u(int r, double theta);

// Covariance of the Gaussian wave on a tree ball; lambda is an eigenvalue
// of the unnormalized adjacency operator, |lambda| <= d.
struct WaveCovariance {
  int d = 3;
  double lambda = 0.0;
  TreeBall ball;
  Eigen::MatrixXd matrix;
};

// Covariance at graph distance r.
double wave_covariance_entry(int d, double lambda, int r);
WaveCovariance wave_covariance(int d, double lambda, const TreeBall& ball);
std::string to_csv(const WaveCovariance& cov);

// Zero-mean Gaussian vector with covariance `cov.matrix`, one entry per ball
// position.
Eigen::VectorXd sample_gaussian_wave(const WaveCovariance& cov, Rng& rng);

// Pairwise distances inside a tree ball (BFS on local edges).
Eigen::MatrixXi ball_distances(const TreeBall& ball);

}  // namespace regwave
