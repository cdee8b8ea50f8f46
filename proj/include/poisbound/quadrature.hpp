#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace poisbound {

struct QuadResult {
  double value = 0.0;
  double abserr = 0.0;
  bool converged = true;
};

// Adaptive bisection with a 15-point Gauss-Legendre rule per panel.  Panel
// error is taken as |GL15 - GL7|.  Bisection midpoints fall on dyadic
// fractions of the interval, so piecewise-constant integrands with dyadic
// breakpoints converge after finitely many splits.
QuadResult integrate_1d(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-9, double abs_tol = 1e-14, int max_depth = 48);

// Tensor-product quadrature over an axis-aligned box via recursive nesting of
// integrate_1d.  Intended for dim <= 4.
QuadResult integrate_box(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<double>& lo, const std::vector<double>& hi,
                         double rel_tol = 1e-8, double abs_tol = 1e-13);

// Midpoint rule on a regular grid; robust for indicator-type integrands.
double integrate_box_midpoint(const std::function<double(const std::vector<double>&)>& f,
                              const std::vector<double>& lo, const std::vector<double>& hi,
                              int nodes_per_dim);

}  // namespace poisbound
