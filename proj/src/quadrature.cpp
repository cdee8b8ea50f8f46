#include "poisbound/quadrature.hpp"

#include <array>
#include <cmath>

namespace poisbound {
namespace {

// Gauss-Legendre 15-point nodes/weights on [-1,1]; the 7-point rule shares
// no nodes, so the difference is a usable error estimate per panel.
constexpr std::array<double, 15> kGL15X = {
    -0.9879925180204854, -0.9372733924007060, -0.8482065834104272, -0.7244177313601701,
    -0.5709721726085388, -0.3941513470775634, -0.2011940939974345, 0.0,
    0.2011940939974345,  0.3941513470775634,  0.5709721726085388,  0.7244177313601701,
    0.8482065834104272,  0.9372733924007060,  0.9879925180204854};
constexpr std::array<double, 15> kGL15W = {
    0.03075324199611727, 0.07036604748810812, 0.1071592204671719, 0.1395706779261543,
    0.1662692058169939,  0.1861610000155622,  0.1984314853271116, 0.2025782419255613,
    0.1984314853271116,  0.1861610000155622,  0.1662692058169939, 0.1395706779261543,
    0.1071592204671719,  0.07036604748810812, 0.03075324199611727};
constexpr std::array<double, 7> kGL7X = {
    -0.9491079123427585, -0.7415311855993945, -0.4058451513773972, 0.0,
    0.4058451513773972,  0.7415311855993945,  0.9491079123427585};
constexpr std::array<double, 7> kGL7W = {
    0.1294849661688697, 0.2797053914892766, 0.3818300505051189, 0.4179591836734694,
    0.3818300505051189, 0.2797053914892766, 0.1294849661688697};

struct Panel {
  double v15, v7;
};

Panel eval_panel(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  Panel p{0.0, 0.0};
  for (int i = 0; i < 15; ++i) p.v15 += kGL15W[i] * f(c + h * kGL15X[i]);
  for (int i = 0; i < 7; ++i) p.v7 += kGL7W[i] * f(c + h * kGL7X[i]);
  p.v15 *= h;
  p.v7 *= h;
  return p;
}

void adapt(const std::function<double(double)>& f, double a, double b, const Panel& p,
           double tol, int depth, int max_depth, QuadResult& out) {
  const double err = std::abs(p.v15 - p.v7);
  if (err <= tol || depth >= max_depth) {
    out.value += p.v15;
    out.abserr += err;
    if (depth >= max_depth && err > tol) out.converged = false;
    return;
  }
  const double m = 0.5 * (a + b);
  const Panel left = eval_panel(f, a, m);
  const Panel right = eval_panel(f, m, b);
  adapt(f, a, m, left, 0.5 * tol, depth + 1, max_depth, out);
  adapt(f, m, b, right, 0.5 * tol, depth + 1, max_depth, out);
}

}  // namespace

QuadResult integrate_1d(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, double abs_tol, int max_depth) {
  QuadResult out;
  if (a == b) return out;
  const Panel whole = eval_panel(f, a, b);
  const double scale = std::max(std::abs(whole.v15), 1e-30);
  adapt(f, a, b, whole, std::max(abs_tol, rel_tol * scale), 0, max_depth, out);
  return out;
}

QuadResult integrate_box(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<double>& lo, const std::vector<double>& hi,
                         double rel_tol, double abs_tol) {
  const int dim = static_cast<int>(lo.size());
  std::vector<double> x(dim, 0.0);
  QuadResult out;
  std::function<double(int)> nest = [&](int d) -> double {
    if (d == dim) return f(x);
    const QuadResult q = integrate_1d(
        [&](double t) {
          x[d] = t;
          return nest(d + 1);
        },
        lo[d], hi[d], rel_tol, abs_tol);
    if (!q.converged) out.converged = false;
    if (d == 0) out.abserr = q.abserr;
    return q.value;
  };
  out.value = nest(0);
  return out;
}

double integrate_box_midpoint(const std::function<double(const std::vector<double>&)>& f,
                              const std::vector<double>& lo, const std::vector<double>& hi,
                              int nodes_per_dim) {
  const int dim = static_cast<int>(lo.size());
  std::vector<double> h(dim), x(dim);
  long total = 1;
  for (int d = 0; d < dim; ++d) {
    h[d] = (hi[d] - lo[d]) / nodes_per_dim;
    total *= nodes_per_dim;
  }
  double cell = 1.0;
  for (int d = 0; d < dim; ++d) cell *= h[d];
  double sum = 0.0;
  std::vector<int> idx(dim, 0);
  for (long it = 0; it < total; ++it) {
    long rem = it;
    for (int d = 0; d < dim; ++d) {
      idx[d] = static_cast<int>(rem % nodes_per_dim);
      rem /= nodes_per_dim;
      x[d] = lo[d] + (idx[d] + 0.5) * h[d];
    }
    sum += f(x);
  }
  return sum * cell;
}

}  // namespace poisbound
