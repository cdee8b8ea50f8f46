#include "poisbound/kernel_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "poisbound/stats.hpp"

namespace poisbound {

namespace {

constexpr std::size_t kDenseBudget = 32u * 1024u * 1024u;  // doubles

void check_budget(int cells, int order, const char* what) {
  std::size_t s = 1;
  for (int i = 0; i < order; ++i) {
    s *= static_cast<std::size_t>(cells);
    if (s > kDenseBudget) {
      std::ostringstream msg;
      msg << what << ": dense tensor of order " << order << " on " << cells
          << " cells exceeds the supported envelope";
      throw std::invalid_argument(msg.str());
    }
  }
}

// iterate over all index tuples of given order
template <typename Fn>
void for_each_index(int cells, int order, Fn&& fn) {
  std::vector<int> idx(order, 0);
  const std::size_t total = dense_size(cells, order);
  for (std::size_t flat = 0; flat < total; ++flat) {
    fn(std::span<const int>(idx), flat);
    for (int d = order - 1; d >= 0; --d) {
      if (++idx[d] < cells) break;
      idx[d] = 0;
    }
  }
}

double tuple_weight(const DiscreteMeasure& space, std::span<const int> idx) {
  double w = 1.0;
  for (int c : idx) w *= space.weight(c);
  return w;
}

}  // namespace

std::shared_ptr<const DiscreteMeasure> DiscreteMeasure::from_weights(std::vector<double> weights) {
  if (weights.empty()) throw std::invalid_argument("DiscreteMeasure: need at least one cell");
  for (double w : weights)
    if (!(w > 0.0)) throw std::invalid_argument("DiscreteMeasure: weights must be positive");
  auto m = std::shared_ptr<DiscreteMeasure>(new DiscreteMeasure());
  m->weights_ = std::move(weights);
  m->total_ = std::accumulate(m->weights_.begin(), m->weights_.end(), 0.0);
  const int M = m->cell_count();
  const double total = m->total_;
  // piecewise-constant density on [0,1): p(x) = (w_i / total) * M on cell i
  std::vector<double> density_values(M);
  for (int i = 0; i < M; ++i) density_values[i] = m->weights_[i] / total * M;
  const double bound = *std::max_element(density_values.begin(), density_values.end());
  auto density = [density_values, M](Point x) {
    int i = static_cast<int>(x[0] * M);
    i = std::clamp(i, 0, M - 1);
    return density_values[i];
  };
  m->control_ = std::make_shared<ControlMeasure>(Box{{0.0}, {1.0}}, density, std::max(bound, 1e-300),
                                                 total);
  m->cells_per_dim_ = {M};
  return m;
}

std::shared_ptr<const DiscreteMeasure> DiscreteMeasure::discretize(
    const ControlMeasure& control, const std::vector<int>& cells_per_dim) {
  const int dim = control.dim();
  if (static_cast<int>(cells_per_dim.size()) != dim)
    throw std::invalid_argument("discretize: cells_per_dim must match box dimension");
  long total_cells = 1;
  for (int c : cells_per_dim) {
    if (c < 1) throw std::invalid_argument("discretize: cells_per_dim entries must be >= 1");
    total_cells *= c;
  }
  auto m = std::shared_ptr<DiscreteMeasure>(new DiscreteMeasure());
  m->cells_per_dim_ = cells_per_dim;
  m->control_ = std::make_shared<ControlMeasure>(control);
  m->weights_.resize(total_cells);
  std::vector<double> lo(dim), hi(dim);
  for (long flat = 0; flat < total_cells; ++flat) {
    long rem = flat;
    for (int d = dim - 1; d >= 0; --d) {
      const int i = static_cast<int>(rem % cells_per_dim[d]);
      rem /= cells_per_dim[d];
      const double step = (control.box().hi[d] - control.box().lo[d]) / cells_per_dim[d];
      lo[d] = control.box().lo[d] + i * step;
      hi[d] = lo[d] + step;
    }
    const double w = control_mass(control, Window{Box{lo, hi}});
    if (!(w > 0.0))
      throw std::invalid_argument("discretize: cell with zero mass; refine the grid or the density");
    m->weights_[flat] = w;
  }
  m->total_ = std::accumulate(m->weights_.begin(), m->weights_.end(), 0.0);
  return m;
}

int DiscreteMeasure::locate(Point x) const {
  const ControlMeasure& c = *control_;
  long flat = 0;
  for (std::size_t d = 0; d < cells_per_dim_.size(); ++d) {
    const double step = (c.box().hi[d] - c.box().lo[d]) / cells_per_dim_[d];
    int i = static_cast<int>((x[d] - c.box().lo[d]) / step);
    i = std::clamp(i, 0, cells_per_dim_[d] - 1);
    flat = flat * cells_per_dim_[d] + i;
  }
  return static_cast<int>(flat);
}

std::vector<double> DiscreteMeasure::cell_center(int cell) const {
  const ControlMeasure& c = *control_;
  const int dim = static_cast<int>(cells_per_dim_.size());
  std::vector<double> x(dim);
  long rem = cell;
  for (int d = dim - 1; d >= 0; --d) {
    const int i = static_cast<int>(rem % cells_per_dim_[d]);
    rem /= cells_per_dim_[d];
    const double step = (c.box().hi[d] - c.box().lo[d]) / cells_per_dim_[d];
    x[d] = c.box().lo[d] + (i + 0.5) * step;
  }
  return x;
}

bool DiscreteMeasure::same_space(const DiscreteMeasure& other) const {
  if (this == &other) return true;
  return weights_ == other.weights_ && cells_per_dim_ == other.cells_per_dim_;
}

SymKernel::SymKernel(std::shared_ptr<const DiscreteMeasure> space, int order,
                     std::vector<double> values, bool validate_symmetry)
    : space_(std::move(space)), order_(order), values_(std::move(values)),
      cache_(std::make_shared<MarginalCache>()) {
  if (order_ < 0) throw std::invalid_argument("SymKernel: order must be >= 0");
  check_budget(space_->cell_count(), order_, "SymKernel");
  if (values_.size() != dense_size(space_->cell_count(), order_))
    throw std::invalid_argument("SymKernel: tensor shape does not match the space");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("SymKernel: non-finite entry");
  cache_->slots.resize(order_ + 1);
  if (validate_symmetry && !is_symmetric())
    throw std::invalid_argument("SymKernel: values are not permutation-symmetric; symmetrize first");
}

SymKernel SymKernel::zero(std::shared_ptr<const DiscreteMeasure> space, int order) {
  std::vector<double> v(dense_size(space->cell_count(), order), 0.0);
  return SymKernel(std::move(space), order, std::move(v), false);
}

SymKernel SymKernel::constant(std::shared_ptr<const DiscreteMeasure> space, int order,
                              double value) {
  std::vector<double> v(dense_size(space->cell_count(), order), value);
  return SymKernel(std::move(space), order, std::move(v), false);
}

SymKernel SymKernel::indicator(std::shared_ptr<const DiscreteMeasure> space,
                               const std::vector<int>& cells, double scale) {
  std::vector<double> v(space->cell_count(), 0.0);
  for (int c : cells) v.at(c) = scale;
  return SymKernel(std::move(space), 1, std::move(v), false);
}

double SymKernel::at(std::span<const int> idx) const {
  return values_[dense_index(cells(), idx)];
}

const std::vector<double>& SymKernel::marginal(int i) const {
  if (i < 0 || i > order_) throw std::invalid_argument("SymKernel::marginal: bad order");
  std::lock_guard<std::mutex> lock(cache_->mutex);
  if (!cache_->slots[order_]) cache_->slots[order_] = values_;
  // integrate out trailing variables one level at a time, caching intermediates
  for (int level = order_ - 1; level >= i; --level) {
    if (cache_->slots[level]) continue;
    const std::vector<double>& prev = *cache_->slots[level + 1];
    const int M = cells();
    std::vector<double> next(dense_size(M, level), 0.0);
    for (std::size_t base = 0; base < next.size(); ++base) {
      double s = 0.0;
      for (int c = 0; c < M; ++c) s += prev[base * M + c] * space_->weight(c);
      next[base] = s;
    }
    cache_->slots[level] = std::move(next);
  }
  return *cache_->slots[i];
}

bool SymKernel::is_symmetric(double tol) const {
  if (order_ <= 1) return true;
  const int M = cells();
  bool ok = true;
  std::vector<int> perm(order_);
  for_each_index(M, order_, [&](std::span<const int> idx, std::size_t flat) {
    if (!ok) return;
    // compare against the sorted representative only
    std::vector<int> sorted(idx.begin(), idx.end());
    std::sort(sorted.begin(), sorted.end());
    const double ref = values_[dense_index(M, sorted)];
    if (std::abs(values_[flat] - ref) > tol * std::max(1.0, std::abs(ref))) ok = false;
  });
  return ok;
}

SymKernel symmetrize(std::shared_ptr<const DiscreteMeasure> space, int order,
                     const std::vector<double>& values) {
  const int M = space->cell_count();
  if (values.size() != dense_size(M, order))
    throw std::invalid_argument("symmetrize: tensor shape does not match the space");
  if (order <= 1) return SymKernel(space, order, values, false);
  std::vector<int> perm_positions(order);
  std::iota(perm_positions.begin(), perm_positions.end(), 0);
  std::vector<double> out(values.size(), 0.0);
  std::vector<int> permuted(order);
  const double inv_fact = 1.0 / factorial(order);
  do {
    for_each_index(M, order, [&](std::span<const int> idx, std::size_t flat) {
      for (int d = 0; d < order; ++d) permuted[d] = idx[perm_positions[d]];
      out[flat] += values[dense_index(M, permuted)];
    });
  } while (std::next_permutation(perm_positions.begin(), perm_positions.end()));
  for (double& v : out) v *= inv_fact;
  return SymKernel(std::move(space), order, std::move(out), false);
}

SymKernel symmetrize(const SymKernel& f) { return symmetrize(f.space(), f.order(), f.values()); }

ContractionResult contract(const SymKernel& f, const SymKernel& g, int r, int l) {
  if (!f.space()->same_space(*g.space()))
    throw std::invalid_argument("contract: kernels live on different spaces");
  const int p = f.order(), q = g.order();
  if (l < 0 || r < l || r > std::min(p, q))
    throw std::invalid_argument("contract: need 0 <= l <= r <= min(p, q)");
  const DiscreteMeasure& space = *f.space();
  const int M = space.cell_count();
  const int out_order = p + q - r - l;
  check_budget(M, out_order, "contract");

  ContractionResult res;
  res.order = out_order;
  res.values.assign(dense_size(M, out_order), 0.0);

  // output layout: (gamma_1..gamma_{r-l}, t_1..t_{p-r}, s_1..s_{q-r})
  const int n_gamma = r - l, n_t = p - r, n_s = q - r;
  std::vector<int> fidx(p), gidx(q);
  for_each_index(M, out_order, [&](std::span<const int> idx, std::size_t flat) {
    const std::span<const int> gamma = idx.subspan(0, n_gamma);
    const std::span<const int> t = idx.subspan(n_gamma, n_t);
    const std::span<const int> s = idx.subspan(n_gamma + n_t, n_s);
    // f(z_1..z_l, gamma, t), g(z_1..z_l, gamma, s); integrate z against mu^l
    double acc = 0.0;
    std::vector<int> z(l, 0);
    for (;;) {
      for (int i = 0; i < l; ++i) fidx[i] = z[i];
      for (int i = 0; i < n_gamma; ++i) fidx[l + i] = gamma[i];
      for (int i = 0; i < n_t; ++i) fidx[l + n_gamma + i] = t[i];
      for (int i = 0; i < l; ++i) gidx[i] = z[i];
      for (int i = 0; i < n_gamma; ++i) gidx[l + i] = gamma[i];
      for (int i = 0; i < n_s; ++i) gidx[l + n_gamma + i] = s[i];
      double w = 1.0;
      for (int i = 0; i < l; ++i) w *= space.weight(z[i]);
      acc += w * f.at(fidx) * g.at(gidx);
      int d = l - 1;
      for (; d >= 0; --d) {
        if (++z[d] < M) break;
        z[d] = 0;
      }
      if (d < 0) break;
    }
    res.values[flat] = acc;
  });
  return res;
}

double tensor_norm(const DiscreteMeasure& space, int order, const std::vector<double>& values,
                   int p) {
  if (p < 2 || p > 4) throw std::invalid_argument("tensor_norm: exponent must be in {2,3,4}");
  double s = 0.0;
  for_each_index(space.cell_count(), order, [&](std::span<const int> idx, std::size_t flat) {
    const double a = std::abs(values[flat]);
    double t = a * a;
    if (p >= 3) t *= a;
    if (p == 4) t *= a;
    s += t * tuple_weight(space, idx);
  });
  return std::pow(s, 1.0 / p);
}

double norm(const SymKernel& f, int p) { return tensor_norm(*f.space(), f.order(), f.values(), p); }

double inner_product(const SymKernel& f, const SymKernel& g) {
  if (!f.space()->same_space(*g.space()) || f.order() != g.order())
    throw std::invalid_argument("inner_product: incompatible kernels");
  double s = 0.0;
  for_each_index(f.cells(), f.order(), [&](std::span<const int> idx, std::size_t flat) {
    s += f.values()[flat] * g.values()[flat] * tuple_weight(*f.space(), idx);
  });
  return s;
}

AssumptionReport check_assumptions(const std::vector<SymKernel>& kernels) {
  if (kernels.empty()) throw std::invalid_argument("check_assumptions: no kernels");
  for (std::size_t i = 1; i < kernels.size(); ++i)
    if (!kernels[i].space()->same_space(*kernels[0].space()))
      throw std::invalid_argument("check_assumptions: kernels on different spaces");
  AssumptionReport rep;
  const DiscreteMeasure& space = *kernels[0].space();

  for (std::size_t i = 0; i < kernels.size(); ++i) {
    const SymKernel& f = kernels[i];
    const int q = f.order();
    for (double v : f.values())
      if (!std::isfinite(v)) rep.all_finite = false;
    // item (1): f *_q^{q-r} f in L^2(mu^r)
    for (int r = 1; r <= q; ++r) {
      const ContractionResult c = contract(f, f, q, q - r);
      rep.item1.push_back({static_cast<int>(i), r, tensor_norm(space, c.order, c.values, 2)});
    }
    // item (2): |f| *_r^l |f| finite pointwise
    std::vector<double> absvals(f.values().size());
    for (std::size_t k = 0; k < absvals.size(); ++k) absvals[k] = std::abs(f.values()[k]);
    const SymKernel fabsk(f.space(), q, absvals, false);
    double sup = 0.0;
    for (int r = 1; r <= q; ++r)
      for (int l = 1; l <= r; ++l) {
        const ContractionResult c = contract(fabsk, fabsk, r, l);
        for (double v : c.values) {
          if (!std::isfinite(v)) rep.all_finite = false;
          sup = std::max(sup, v);
        }
      }
    rep.item2_sup.push_back(sup);
  }

  // item (3): cross integrals over z of L^2 norms of slice contractions
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    for (std::size_t j = 0; j < kernels.size(); ++j) {
      const int qi = kernels[i].order(), qj = kernels[j].order();
      if (std::max(qi, qj) <= 1) continue;
      const int kmin = std::max(std::abs(qi - qj), 1), kmax = qi + qj - 2;
      for (int k = kmin; k <= kmax; ++k) {
        for (int r = 0; r <= std::min(qi, qj) - 1; ++r) {
          for (int l = 0; l <= r; ++l) {
            if (qi + qj - 2 - r - l != k) continue;
            double total = 0.0;
            for (int z = 0; z < space.cell_count(); ++z) {
              // slice f_i(z, .) of order qi-1
              const std::size_t stride_i = dense_size(space.cell_count(), qi - 1);
              const std::size_t stride_j = dense_size(space.cell_count(), qj - 1);
              std::vector<double> si(kernels[i].values().begin() + z * stride_i,
                                     kernels[i].values().begin() + (z + 1) * stride_i);
              std::vector<double> sj(kernels[j].values().begin() + z * stride_j,
                                     kernels[j].values().begin() + (z + 1) * stride_j);
              const SymKernel ki(kernels[i].space(), qi - 1, std::move(si), false);
              const SymKernel kj(kernels[j].space(), qj - 1, std::move(sj), false);
              const ContractionResult c = contract(ki, kj, r, l);
              total += space.weight(z) * tensor_norm(space, c.order, c.values, 2);
            }
            if (!std::isfinite(total)) rep.all_finite = false;
            rep.item3.push_back({static_cast<int>(i), static_cast<int>(j), k, r, l, total});
          }
        }
      }
    }
  }
  rep.bounded_rectangle = rep.all_finite;  // finite spaces: bounded kernels on a finite rectangle
  return rep;
}

void save_kernel(const SymKernel& kernel, std::ostream& os) {
  os.precision(17);
  os << "poisbound-symkernel 1\n";
  os << "order " << kernel.order() << "\n";
  os << "cells " << kernel.cells() << "\n";
  os << "weights";
  for (double w : kernel.space()->weights()) os << " " << w;
  os << "\nvalues";
  for (double v : kernel.values()) os << " " << v;
  os << "\n";
}

SymKernel load_kernel(std::istream& is) {
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (tag != "poisbound-symkernel" || version != 1)
    throw std::runtime_error("load_kernel: unrecognized header");
  std::string field;
  int order = -1, cells = -1;
  is >> field >> order;
  if (field != "order") throw std::runtime_error("load_kernel: expected 'order'");
  is >> field >> cells;
  if (field != "cells") throw std::runtime_error("load_kernel: expected 'cells'");
  is >> field;
  if (field != "weights") throw std::runtime_error("load_kernel: expected 'weights'");
  std::vector<double> weights(cells);
  for (double& w : weights) is >> w;
  is >> field;
  if (field != "values") throw std::runtime_error("load_kernel: expected 'values'");
  std::vector<double> values(dense_size(cells, order));
  for (double& v : values) is >> v;
  if (!is) throw std::runtime_error("load_kernel: truncated stream");
  return SymKernel(DiscreteMeasure::from_weights(std::move(weights)), order, std::move(values));
}

void save_kernel_file(const SymKernel& kernel, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_kernel_file: cannot open " + path);
  save_kernel(kernel, os);
}

SymKernel load_kernel_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_kernel_file: cannot open " + path);
  return load_kernel(is);
}

}  // namespace poisbound
