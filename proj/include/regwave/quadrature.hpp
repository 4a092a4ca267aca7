#pragma once

#include <cmath>
#include <functional>

#include "regwave/errors.hpp"

namespace regwave {

// Adaptive Simpson rule with Richardson correction. Throws NumericalError
// when the recursion depth is exhausted before the tolerance is met.
class AdaptiveSimpson {
 public:
  explicit AdaptiveSimpson(double abs_tol = 1e-12, int max_depth = 48)
      : abs_tol_(abs_tol), max_depth_(max_depth) {}

  double operator()(const std::function<double(double)>& f, double a, double b) const {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return refine(f, a, b, fa, fm, fb, whole, abs_tol_, max_depth_);
  }

 private:
  double refine(const std::function<double(double)>& f, double a, double b, double fa,
                double fm, double fb, double whole, double tol, int depth) const {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth <= 0) throw NumericalError("adaptive Simpson did not converge");
    return refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
  }

  double abs_tol_;
  int max_depth_;
};

}  // namespace regwave
