#pragma once

#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisbound/poisson_space.hpp"

namespace poisbound {

// Finite weighted cell space carrying the L^2(mu^q) algebra.  A discrete
// measure always has a concrete embedding as a control measure (standalone
// spaces live on [0,1] with equal-length cells; discretized spaces keep the
// grid of the originating ControlMeasure), so configurations sampled from the
// embedding are simple point processes and kernels act on cell indices.
class DiscreteMeasure {
 public:
  // Standalone space: cell i maps to [i/M, (i+1)/M) on the unit interval.
  static std::shared_ptr<const DiscreteMeasure> from_weights(std::vector<double> weights);

  // Regular grid over the box of `control`; cell weights are mu(cell).
  static std::shared_ptr<const DiscreteMeasure> discretize(const ControlMeasure& control,
                                                           const std::vector<int>& cells_per_dim);

  int cell_count() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& weights() const { return weights_; }
  double weight(int i) const { return weights_[i]; }
  double total_mass() const { return total_; }

  const ControlMeasure& control() const { return *control_; }
  int locate(Point x) const;
  // representative point of a cell (its center), usable for evaluation
  std::vector<double> cell_center(int i) const;

  bool same_space(const DiscreteMeasure& other) const;

 private:
  DiscreteMeasure() = default;
  std::vector<double> weights_;
  double total_ = 0.0;
  std::shared_ptr<const ControlMeasure> control_;
  std::vector<int> cells_per_dim_;  // grid shape of the embedding
};

// Dense symmetric kernel f in L^2_s(mu^q), values stored row-major over cell
// indices.  Supported envelope: q <= 4 and M <= 32 (contraction outputs are
// guarded against blowing past the dense budget).
class SymKernel {
 public:
  SymKernel(std::shared_ptr<const DiscreteMeasure> space, int order, std::vector<double> values,
            bool validate_symmetry = true);

  static SymKernel zero(std::shared_ptr<const DiscreteMeasure> space, int order);
  static SymKernel constant(std::shared_ptr<const DiscreteMeasure> space, int order, double value);
  // order-1 indicator of a cell set
  static SymKernel indicator(std::shared_ptr<const DiscreteMeasure> space,
                             const std::vector<int>& cells, double scale = 1.0);

  int order() const { return order_; }
  int cells() const { return space_->cell_count(); }
  const std::shared_ptr<const DiscreteMeasure>& space() const { return space_; }
  const std::vector<double>& values() const { return values_; }

  double at(std::span<const int> idx) const;

  // f integrated against mu^{q-i} in the trailing q-i variables; cached per
  // kernel with single-writer initialization.
  const std::vector<double>& marginal(int i) const;

  bool is_symmetric(double tol = 1e-12) const;

 private:
  struct MarginalCache {
    std::once_flag once;
    std::atomic<bool> ready{false};
    std::vector<std::vector<double>> slots;
  };
  std::shared_ptr<const DiscreteMeasure> space_;
  int order_;
  std::vector<double> values_;
  std::shared_ptr<MarginalCache> cache_;
};

// Canonical symmetrization (1/q!) sum over permutations; idempotent.
SymKernel symmetrize(const SymKernel& f);
SymKernel symmetrize(std::shared_ptr<const DiscreteMeasure> space, int order,
                     const std::vector<double>& values);

// Contraction f *_r^l g: identifies r variables, integrates out l of them.
// r = l = 0 is the tensor product.  The result is generally not symmetric,
// so it is returned as a plain tensor with its order.
struct ContractionResult {
  int order;
  std::vector<double> values;
};
ContractionResult contract(const SymKernel& f, const SymKernel& g, int r, int l);

// L^p(mu^q) norm of a dense tensor over the space, p in {2,3,4}.
double tensor_norm(const DiscreteMeasure& space, int order, const std::vector<double>& values,
                   int p);
double norm(const SymKernel& f, int p = 2);
double inner_product(const SymKernel& f, const SymKernel& g);

// Finiteness report for the standing kernel assumptions (items (1)-(3));
// trivially finite on a finite space, values reported for diagnostics.
struct AssumptionReport {
  bool all_finite = true;
  bool bounded_rectangle = false;
  struct SelfContraction {
    int kernel, r;
    double l2_norm;
  };
  std::vector<SelfContraction> item1;
  std::vector<double> item2_sup;  // per kernel: max over (r,l) of sup |f|*_r^l|f|
  struct CrossIntegral {
    int i, j, k, r, l;
    double value;
  };
  std::vector<CrossIntegral> item3;
};
AssumptionReport check_assumptions(const std::vector<SymKernel>& kernels);

// Self-describing text serialization (order, M, weights, row-major values).
void save_kernel(const SymKernel& kernel, std::ostream& os);
SymKernel load_kernel(std::istream& is);
void save_kernel_file(const SymKernel& kernel, const std::string& path);
SymKernel load_kernel_file(const std::string& path);

// Dense index helpers shared with the chaos module.
inline std::size_t dense_size(int cells, int order) {
  std::size_t s = 1;
  for (int i = 0; i < order; ++i) s *= static_cast<std::size_t>(cells);
  return s;
}
inline std::size_t dense_index(int cells, std::span<const int> idx) {
  std::size_t k = 0;
  for (int v : idx) k = k * static_cast<std::size_t>(cells) + static_cast<std::size_t>(v);
  return k;
}

}  // namespace poisbound
