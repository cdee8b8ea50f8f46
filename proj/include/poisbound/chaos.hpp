#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisbound/kernel_algebra.hpp"
#include "poisbound/poisson_space.hpp"
#include "poisbound/stats.hpp"

namespace poisbound {

// Quadrature nodes for integrals \int . mu(dz).  Discrete-space functionals
// address nodes by cell index; continuous functionals by coordinates.
struct ZNodes {
  int dim = 1;
  std::vector<double> coords;   // flat, dim per node
  std::vector<double> weights;  // mu-mass attached to each node
  std::vector<int> cells;       // cell ids when nodes are measure cells, else empty
  std::size_t size() const { return weights.size(); }
  Point point(std::size_t i) const { return Point(coords.data() + i * dim, dim); }
};

// A square-integrable Poisson functional with computable add-one-cost D and
// computable D L^{-1}(F - EF).  The batch signature lets implementations
// share per-configuration state (cell counts, neighbor grids) across nodes.
class MalliavinFunctional {
 public:
  virtual ~MalliavinFunctional() = default;
  virtual double value(const Configuration&) const = 0;
  virtual double mean() const = 0;
  virtual bool integer_valued() const = 0;
  virtual std::string structure() const = 0;
  // Fills D[i] = D_{z_i} F and DLinv[i] = D_{z_i} L^{-1}(F - EF).  The bound
  // coefficients use -DLinv.
  virtual void malliavin(const Configuration&, const ZNodes&, std::span<double> D,
                         std::span<double> DLinv) const = 0;
  // Radius R such that D_z F = 0 whenever z is farther than R from every
  // configuration point; negative when no such radius exists.
  virtual double interaction_radius() const { return -1.0; }
};

// F = mean + sum_q I_q(f_q) on a discrete space, with every operator exact.
class DiscreteChaosFunctional : public MalliavinFunctional {
 public:
  struct Term {
    int order;
    SymKernel kernel;
  };

  DiscreteChaosFunctional(double mean, std::vector<Term> terms, bool integer_valued = false,
                          std::string structure = "composite");

  const std::vector<Term>& terms() const { return terms_; }
  const std::shared_ptr<const DiscreteMeasure>& space() const { return space_; }
  int max_order() const;
  double variance() const;  // sum_q q! ||f_q||^2

  double value(const Configuration&) const override;
  double mean() const override { return mean_; }
  bool integer_valued() const override { return integer_valued_; }
  std::string structure() const override { return structure_; }
  void malliavin(const Configuration&, const ZNodes&, std::span<double> D,
                 std::span<double> DLinv) const override;

  double mall_D(const Configuration&, int cell) const;
  double mall_DLinv(const Configuration&, int cell) const;

 private:
  double mean_;
  std::vector<Term> terms_;
  std::shared_ptr<const DiscreteMeasure> space_;
  bool integer_valued_;
  std::string structure_;
};

// eta(A) for a cell set A: mean mu(A) plus first-chaos indicator kernel.
DiscreteChaosFunctional window_functional(std::shared_ptr<const DiscreteMeasure> space,
                                          const std::vector<int>& cells);
// I_q(f) as a centered functional.
DiscreteChaosFunctional integral_functional(const SymKernel& f);
// U-statistic with kernel h (order k) and its exact chaos projections
// f_i = binom(k, i) * marginal_i(h).
DiscreteChaosFunctional ustat_functional(const SymKernel& h, bool integer_valued = false);
// (F - shift) / scale
DiscreteChaosFunctional scaled_functional(const DiscreteChaosFunctional& f, double shift,
                                          double scale);
// Exact Cov(F, G) = sum_q q! <f_q, g_q>.
double exact_covariance(const DiscreteChaosFunctional& f, const DiscreteChaosFunctional& g);

// --- U-statistics -----------------------------------------------------------

// Order-k U-statistic: sum of h over ordered k-tuples of distinct points.
// Discrete flavor wraps a SymKernel; continuous flavor wraps a symmetric
// callable evaluated on point tuples.
class UStatistic {
 public:
  explicit UStatistic(SymKernel h);
  UStatistic(int order, std::function<double(std::span<const Point>)> h,
             std::shared_ptr<const ControlMeasure> measure);

  int order() const { return order_; }
  bool discrete() const { return kernel_.has_value(); }
  const SymKernel& kernel() const;
  const ControlMeasure& measure() const;
  double evaluate_h(std::span<const Point> pts) const;

  // spot-check of evaluator symmetry on random argument permutations
  void check_symmetry(RngStream& rng, int trials = 16, double tol = 1e-12) const;

 private:
  int order_;
  std::optional<SymKernel> kernel_;
  std::function<double(std::span<const Point>)> h_;
  std::shared_ptr<const ControlMeasure> measure_;
};

// Sum of h over all ordered k-tuples of distinct configuration points.
double ustat_eval(const UStatistic& u, const Configuration& config);

// Hoeffding/chaos projection f_i = binom(k,i) \int h d mu^{k-i}.
// Discrete spaces: exact tensor sums.
SymKernel hoeffding_projection(const UStatistic& u, int i);
// Continuous spaces: product Gauss-Legendre quadrature with quad_nodes points
// per dimension; errors out when the node budget nodes^{m(k-i)} exceeds 1e8.
double hoeffding_projection_at(const UStatistic& u, int i, std::span<const Point> x,
                               int quad_nodes);

// --- multiple integrals ------------------------------------------------------

// I_q(f) evaluated pathwise by inclusion-exclusion over distinct sub-tuples,
// exact on discrete spaces:
//   I_q(f)(w) = sum_{i=0}^{q} (-1)^{q-i} binom(q,i) sum_{x in w^i_{neq}} fbar_i(x).
double multiple_integral_eval(const SymKernel& f, const Configuration& config);

// Right side of the product formula: the double sum over (r, l) of
// binomial-weighted I_{p+q-r-l}(sym(f *_r^l g)), evaluated pathwise.
double product_formula_rhs(const SymKernel& f, const SymKernel& g, const Configuration& config);

// Generic add-one-cost D_z F = F(w + delta_z) - F(w).
double mall_D(const std::function<double(const Configuration&)>& f, const Configuration& config,
              Point z, const Box& box);

// Monte Carlo check of the isometry E[I_q(f) I_{q'}(g)] = q! <f,g> 1{q=q'}.
struct IsometryReport {
  double mean_f = 0, se_mean_f = 0;
  double mean_g = 0, se_mean_g = 0;
  double cross_moment = 0, se_cross = 0;
  double target = 0;  // q! <f,g> 1{q = q'}
  std::size_t replicates = 0;
};
IsometryReport verify_isometry(const SymKernel& f, const SymKernel& g, std::size_t replicates,
                               std::uint64_t seed);

}  // namespace poisbound
