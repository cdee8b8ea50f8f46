#include "poisbound/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace poisbound {

namespace {

// Occupancy of measure cells by configuration points.
struct CellCounts {
  std::vector<int> occupied;  // cells with at least one point
  std::vector<int> count;     // per cell
  long total = 0;
};

CellCounts locate_all(const DiscreteMeasure& space, const Configuration& config) {
  CellCounts cc;
  cc.count.assign(space.cell_count(), 0);
  for (std::size_t i = 0; i < config.size(); ++i) {
    const int c = space.locate(config.point(i));
    if (cc.count[c] == 0) cc.occupied.push_back(c);
    ++cc.count[c];
  }
  std::sort(cc.occupied.begin(), cc.occupied.end());
  cc.total = static_cast<long>(config.size());
  return cc;
}

void require_simple(const Configuration& config, const char* what) {
  if (config.has_duplicate_points()) {
    std::ostringstream msg;
    msg << what << ": configuration has duplicate points (the control measure is non-atomic; "
        << "duplicates indicate a caller bug)";
    throw std::invalid_argument(msg.str());
  }
}

// Sum over ordered tuples of *distinct points* of tensor[prefix, cells(x_1..x_i)].
// Points sharing a cell are distinct, so the count of ordered point tuples
// realizing a given cell tuple is a product of falling factorials; recursion
// runs over occupied cells only.
double factorial_moment_sum(const DiscreteMeasure& space, const std::vector<double>& tensor,
                            std::span<const int> prefix, int i, CellCounts& cc) {
  const int M = space.cell_count();
  std::size_t base = 0;
  for (int c : prefix) base = base * M + static_cast<std::size_t>(c);
  if (i == 0) return tensor[base];

  double total = 0.0;
  std::vector<int> tuple(i);
  std::vector<int> used(cc.occupied.size(), 0);
  std::function<void(int, std::size_t, double)> rec = [&](int depth, std::size_t flat, double ways) {
    if (depth == i) {
      total += ways * tensor[flat];
      return;
    }
    for (std::size_t oi = 0; oi < cc.occupied.size(); ++oi) {
      const int c = cc.occupied[oi];
      const int avail = cc.count[c] - used[oi];
      if (avail <= 0) continue;
      ++used[oi];
      rec(depth + 1, flat * M + static_cast<std::size_t>(c), ways * avail);
      --used[oi];
    }
  };
  rec(0, base, 1.0);
  return total;
}

// I_{q - prefix}(f(prefix, .))(w) by inclusion-exclusion with exact marginals.
double eval_integral_slice(const SymKernel& f, std::span<const int> prefix, CellCounts& cc) {
  const int qq = f.order() - static_cast<int>(prefix.size());
  double acc = 0.0;
  for (int i = 0; i <= qq; ++i) {
    const std::vector<double>& marg = f.marginal(static_cast<int>(prefix.size()) + i);
    const double s = factorial_moment_sum(*f.space(), marg, prefix, i, cc);
    const double sign = ((qq - i) % 2 == 0) ? 1.0 : -1.0;
    acc += sign * binomial(qq, i) * s;
  }
  return acc;
}

}  // namespace

// --- DiscreteChaosFunctional -------------------------------------------------

DiscreteChaosFunctional::DiscreteChaosFunctional(double mean, std::vector<Term> terms,
                                                 bool integer_valued, std::string structure)
    : mean_(mean), terms_(std::move(terms)), integer_valued_(integer_valued),
      structure_(std::move(structure)) {
  if (terms_.empty()) throw std::invalid_argument("DiscreteChaosFunctional: no chaos terms");
  space_ = terms_[0].kernel.space();
  for (const Term& t : terms_) {
    if (t.order != t.kernel.order())
      throw std::invalid_argument("DiscreteChaosFunctional: term order mismatch");
    if (t.order < 1) throw std::invalid_argument("DiscreteChaosFunctional: term order must be >= 1");
    if (!t.kernel.space()->same_space(*space_))
      throw std::invalid_argument("DiscreteChaosFunctional: terms on different spaces");
  }
}

int DiscreteChaosFunctional::max_order() const {
  int q = 0;
  for (const Term& t : terms_) q = std::max(q, t.order);
  return q;
}

double DiscreteChaosFunctional::variance() const {
  double v = 0.0;
  for (const Term& t : terms_) {
    const double n = norm(t.kernel, 2);
    v += factorial(t.order) * n * n;
  }
  return v;
}

double DiscreteChaosFunctional::value(const Configuration& config) const {
  require_simple(config, "DiscreteChaosFunctional::value");
  CellCounts cc = locate_all(*space_, config);
  double v = mean_;
  for (const Term& t : terms_) v += eval_integral_slice(t.kernel, {}, cc);
  return v;
}

void DiscreteChaosFunctional::malliavin(const Configuration& config, const ZNodes& nodes,
                                        std::span<double> D, std::span<double> DLinv) const {
  if (nodes.cells.size() != nodes.size())
    throw std::invalid_argument("DiscreteChaosFunctional::malliavin: nodes must carry cell ids");
  require_simple(config, "DiscreteChaosFunctional::malliavin");
  CellCounts cc = locate_all(*space_, config);
  // D_z F   = sum_q q I_{q-1}(f_q(z, .))
  // D_z L^{-1}(F - EF) = -sum_q I_{q-1}(f_q(z, .))
  std::vector<double> slice_by_cell(space_->cell_count(), 0.0);
  std::fill(D.begin(), D.end(), 0.0);
  std::fill(DLinv.begin(), DLinv.end(), 0.0);
  std::vector<double> per_cell_D(space_->cell_count(), 0.0);
  std::vector<double> per_cell_L(space_->cell_count(), 0.0);
  for (const Term& t : terms_) {
    for (int c = 0; c < space_->cell_count(); ++c) {
      const int prefix[1] = {c};
      const double s = eval_integral_slice(t.kernel, prefix, cc);
      per_cell_D[c] += t.order * s;
      per_cell_L[c] -= s;
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    D[i] = per_cell_D[nodes.cells[i]];
    DLinv[i] = per_cell_L[nodes.cells[i]];
  }
}

double DiscreteChaosFunctional::mall_D(const Configuration& config, int cell) const {
  require_simple(config, "mall_D");
  CellCounts cc = locate_all(*space_, config);
  double v = 0.0;
  const int prefix[1] = {cell};
  for (const Term& t : terms_) v += t.order * eval_integral_slice(t.kernel, prefix, cc);
  return v;
}

double DiscreteChaosFunctional::mall_DLinv(const Configuration& config, int cell) const {
  require_simple(config, "mall_DLinv");
  CellCounts cc = locate_all(*space_, config);
  double v = 0.0;
  const int prefix[1] = {cell};
  for (const Term& t : terms_) v -= eval_integral_slice(t.kernel, prefix, cc);
  return v;
}

DiscreteChaosFunctional window_functional(std::shared_ptr<const DiscreteMeasure> space,
                                          const std::vector<int>& cells) {
  double mass = 0.0;
  for (int c = 0; c < space->cell_count(); ++c) {
    const bool in = std::find(cells.begin(), cells.end(), c) != cells.end();
    if (in) mass += space->weight(c);
  }
  SymKernel ind = SymKernel::indicator(space, cells);
  std::vector<DiscreteChaosFunctional::Term> terms;
  terms.push_back({1, std::move(ind)});
  return DiscreteChaosFunctional(mass, std::move(terms), /*integer_valued=*/true, "u-statistic");
}

DiscreteChaosFunctional integral_functional(const SymKernel& f) {
  std::vector<DiscreteChaosFunctional::Term> terms;
  terms.push_back({f.order(), f});
  return DiscreteChaosFunctional(0.0, std::move(terms), false, "multiple-integral");
}

DiscreteChaosFunctional ustat_functional(const SymKernel& h, bool integer_valued) {
  const int k = h.order();
  const double mean = h.marginal(0)[0];
  std::vector<DiscreteChaosFunctional::Term> terms;
  for (int i = 1; i <= k; ++i) {
    const std::vector<double>& marg = h.marginal(i);
    std::vector<double> vals(marg.size());
    const double coef = binomial(k, i);
    for (std::size_t j = 0; j < marg.size(); ++j) vals[j] = coef * marg[j];
    terms.push_back({i, SymKernel(h.space(), i, std::move(vals), false)});
  }
  return DiscreteChaosFunctional(mean, std::move(terms), integer_valued, "u-statistic");
}

DiscreteChaosFunctional scaled_functional(const DiscreteChaosFunctional& f, double shift,
                                          double scale) {
  if (scale == 0.0) throw std::invalid_argument("scaled_functional: zero scale");
  std::vector<DiscreteChaosFunctional::Term> terms;
  for (const auto& t : f.terms()) {
    std::vector<double> vals = t.kernel.values();
    for (double& v : vals) v /= scale;
    terms.push_back({t.order, SymKernel(t.kernel.space(), t.order, std::move(vals), false)});
  }
  return DiscreteChaosFunctional((f.mean() - shift) / scale, std::move(terms), false,
                                 f.structure());
}

double exact_covariance(const DiscreteChaosFunctional& f, const DiscreteChaosFunctional& g) {
  double cov = 0.0;
  for (const auto& tf : f.terms())
    for (const auto& tg : g.terms())
      if (tf.order == tg.order) cov += factorial(tf.order) * inner_product(tf.kernel, tg.kernel);
  return cov;
}

// --- UStatistic ----------------------------------------------------------------

UStatistic::UStatistic(SymKernel h) : order_(h.order()), kernel_(std::move(h)) {}

UStatistic::UStatistic(int order, std::function<double(std::span<const Point>)> h,
                       std::shared_ptr<const ControlMeasure> measure)
    : order_(order), h_(std::move(h)), measure_(std::move(measure)) {
  if (order_ < 1) throw std::invalid_argument("UStatistic: order must be >= 1");
  if (!h_) throw std::invalid_argument("UStatistic: missing evaluator");
  if (!measure_) throw std::invalid_argument("UStatistic: missing control measure");
}

const SymKernel& UStatistic::kernel() const {
  if (!kernel_) throw std::logic_error("UStatistic: continuous statistic has no discrete kernel");
  return *kernel_;
}

const ControlMeasure& UStatistic::measure() const {
  if (kernel_) return kernel_->space()->control();
  return *measure_;
}

double UStatistic::evaluate_h(std::span<const Point> pts) const {
  if (static_cast<int>(pts.size()) != order_)
    throw std::invalid_argument("UStatistic: tuple arity mismatch");
  if (kernel_) {
    std::vector<int> idx(order_);
    for (int i = 0; i < order_; ++i) idx[i] = kernel_->space()->locate(pts[i]);
    return kernel_->at(idx);
  }
  return h_(pts);
}

void UStatistic::check_symmetry(RngStream& rng, int trials, double tol) const {
  const ControlMeasure& m = measure();
  const int dim = m.dim();
  std::vector<double> flat(order_ * dim);
  std::vector<Point> pts(order_);
  std::vector<Point> perm(order_);
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < order_ * dim; ++i) {
      const int d = i % dim;
      flat[i] = rng.uniform(m.box().lo[d], m.box().hi[d]);
    }
    for (int i = 0; i < order_; ++i) pts[i] = Point(flat.data() + i * dim, dim);
    const double ref = evaluate_h(pts);
    // a random transposition
    perm.assign(pts.begin(), pts.end());
    const int a = static_cast<int>(rng.uniform() * order_) % order_;
    const int b = static_cast<int>(rng.uniform() * order_) % order_;
    std::swap(perm[a], perm[b]);
    const double swapped = evaluate_h(perm);
    if (std::abs(ref - swapped) > tol * std::max(1.0, std::abs(ref)))
      throw std::invalid_argument("UStatistic: evaluator is not symmetric under permutations");
  }
}

double ustat_eval(const UStatistic& u, const Configuration& config) {
  require_simple(config, "ustat_eval");
  const int k = u.order();
  const long n = static_cast<long>(config.size());
  if (n < k) return 0.0;
  if (u.discrete()) {
    CellCounts cc = locate_all(*u.kernel().space(), config);
    return factorial_moment_sum(*u.kernel().space(), u.kernel().values(), {}, k, cc);
  }
  // continuous path: k! * sum over unordered k-subsets (h symmetric)
  double total = 0.0;
  std::vector<int> choice(k);
  std::vector<Point> pts(k);
  std::function<void(int, int)> rec = [&](int depth, int start) {
    if (depth == k) {
      for (int i = 0; i < k; ++i) pts[i] = config.point(choice[i]);
      total += u.evaluate_h(pts);
      return;
    }
    for (int i = start; i < n; ++i) {
      choice[depth] = i;
      rec(depth + 1, i + 1);
    }
  };
  rec(0, 0);
  return total * factorial(k);
}

SymKernel hoeffding_projection(const UStatistic& u, int i) {
  if (!u.discrete())
    throw std::invalid_argument(
        "hoeffding_projection: exact kernels require a discrete space; use "
        "hoeffding_projection_at for continuous statistics");
  if (i < 1 || i > u.order()) throw std::invalid_argument("hoeffding_projection: need 1 <= i <= k");
  const SymKernel& h = u.kernel();
  if (i == u.order()) return h;
  const std::vector<double>& marg = h.marginal(i);
  std::vector<double> vals(marg.size());
  const double coef = binomial(u.order(), i);
  for (std::size_t j = 0; j < marg.size(); ++j) vals[j] = coef * marg[j];
  return SymKernel(h.space(), i, std::move(vals), false);
}

double hoeffding_projection_at(const UStatistic& u, int i, std::span<const Point> x,
                               int quad_nodes) {
  if (i < 1 || i > u.order()) throw std::invalid_argument("hoeffding_projection: need 1 <= i <= k");
  if (static_cast<int>(x.size()) != i)
    throw std::invalid_argument("hoeffding_projection_at: arity mismatch");
  const int k = u.order();
  if (i == k) return u.evaluate_h(x);
  if (u.discrete()) {
    std::vector<int> idx(i);
    for (int d = 0; d < i; ++d) idx[d] = u.kernel().space()->locate(x[d]);
    const std::vector<double>& marg = u.kernel().marginal(i);
    std::size_t flat = 0;
    for (int v : idx) flat = flat * u.kernel().cells() + static_cast<std::size_t>(v);
    return binomial(k, i) * marg[flat];
  }
  const ControlMeasure& m = u.measure();
  const int dim = m.dim();
  const int free = k - i;
  double budget = 1.0;
  for (int d = 0; d < dim * free; ++d) {
    budget *= quad_nodes;
    if (budget > 1e8)
      throw std::invalid_argument(
          "hoeffding_projection_at: quadrature budget nodes^{m(k-i)} exceeds 1e8; "
          "use Monte Carlo integration instead");
  }
  // product Gauss-Legendre grid over the remaining k-i arguments
  std::vector<double> gl_x(quad_nodes), gl_w(quad_nodes);
  // nodes of the Legendre rule via Newton iteration on P_n
  for (int j = 0; j < quad_nodes; ++j) {
    double t = std::cos(3.14159265358979323846 * (j + 0.75) / (quad_nodes + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int n2 = 2; n2 <= quad_nodes; ++n2) {
        const double p2 = ((2.0 * n2 - 1.0) * t * p1 - (n2 - 1.0) * p0) / n2;
        p0 = p1;
        p1 = p2;
      }
      const double dp = quad_nodes * (t * p1 - p0) / (t * t - 1.0);
      const double t1 = t - p1 / dp;
      if (std::abs(t1 - t) < 1e-15) {
        t = t1;
        break;
      }
      t = t1;
    }
    double p0 = 1.0, p1 = t;
    for (int n2 = 2; n2 <= quad_nodes; ++n2) {
      const double p2 = ((2.0 * n2 - 1.0) * t * p1 - (n2 - 1.0) * p0) / n2;
      p0 = p1;
      p1 = p2;
    }
    const double dp = quad_nodes * (t * p1 - p0) / (t * t - 1.0);
    gl_x[j] = t;
    gl_w[j] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
  const int free_dims = dim * free;
  std::vector<double> y(free_dims);
  std::vector<double> tuple_flat((i + free) * dim);
  std::vector<Point> pts(k);
  for (int d = 0; d < i; ++d)
    std::copy(x[d].begin(), x[d].end(), tuple_flat.begin() + d * dim);
  double total = 0.0;
  std::vector<int> idx(free_dims, 0);
  for (;;) {
    double w = 1.0;
    for (int d = 0; d < free_dims; ++d) {
      const int axis = d % dim;
      const double lo = m.box().lo[axis], hi = m.box().hi[axis];
      y[d] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gl_x[idx[d]];
      w *= 0.5 * (hi - lo) * gl_w[idx[d]];
    }
    for (int j = 0; j < free; ++j)
      std::copy(y.begin() + j * dim, y.begin() + (j + 1) * dim,
                tuple_flat.begin() + (i + j) * dim);
    for (int j = 0; j < k; ++j) pts[j] = Point(tuple_flat.data() + j * dim, dim);
    double dens = 1.0;
    for (int j = 0; j < free; ++j) dens *= m.intensity() * m.density(pts[i + j]);
    total += w * dens * u.evaluate_h(pts);
    int d = free_dims - 1;
    for (; d >= 0; --d) {
      if (++idx[d] < quad_nodes) break;
      idx[d] = 0;
    }
    if (d < 0) break;
  }
  return binomial(k, i) * total;
}

// --- multiple integrals --------------------------------------------------------

double multiple_integral_eval(const SymKernel& f, const Configuration& config) {
  if (!f.is_symmetric())
    throw std::invalid_argument("multiple_integral_eval: kernel must be symmetric (symmetrize first)");
  require_simple(config, "multiple_integral_eval");
  CellCounts cc = locate_all(*f.space(), config);
  return eval_integral_slice(f, {}, cc);
}

double product_formula_rhs(const SymKernel& f, const SymKernel& g, const Configuration& config) {
  if (!f.space()->same_space(*g.space()))
    throw std::invalid_argument("product_formula_rhs: kernels on different spaces");
  require_simple(config, "product_formula_rhs");
  const int p = f.order(), q = g.order();
  CellCounts cc = locate_all(*f.space(), config);
  double total = 0.0;
  for (int r = 0; r <= std::min(p, q); ++r) {
    const double c_r = factorial(r) * binomial(p, r) * binomial(q, r);
    for (int l = 0; l <= r; ++l) {
      const ContractionResult raw = contract(f, g, r, l);
      const SymKernel sym = symmetrize(f.space(), raw.order, raw.values);
      const double coef = c_r * binomial(r, l);
      if (raw.order == 0)
        total += coef * sym.values()[0];
      else
        total += coef * eval_integral_slice(sym, {}, cc);
    }
  }
  return total;
}

double mall_D(const std::function<double(const Configuration&)>& f, const Configuration& config,
              Point z, const Box& box) {
  return f(add_point(config, z, box)) - f(config);
}

IsometryReport verify_isometry(const SymKernel& f, const SymKernel& g, std::size_t replicates,
                               std::uint64_t seed) {
  if (!f.space()->same_space(*g.space()))
    throw std::invalid_argument("verify_isometry: kernels on different spaces");
  if (replicates < 1000)
    throw std::invalid_argument("verify_isometry: need at least 1e3 replicates");
  const ControlMeasure& control = f.space()->control();
  const std::size_t n_chunks = 64;
  std::vector<MeanVar> acc_f(n_chunks), acc_g(n_chunks), acc_fg(n_chunks);
  parallel_replicates(replicates, [&](std::size_t chunk, std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      RngStream rng(seed, streams::kSampling, r);
      const Configuration config = sample_configuration(control, rng);
      CellCounts cc = locate_all(*f.space(), config);
      const double vf = eval_integral_slice(f, {}, cc);
      const double vg = eval_integral_slice(g, {}, cc);
      acc_f[chunk].add(vf);
      acc_g[chunk].add(vg);
      acc_fg[chunk].add(vf * vg);
    }
  });
  MeanVar mf, mg, mfg;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    mf.merge(acc_f[c]);
    mg.merge(acc_g[c]);
    mfg.merge(acc_fg[c]);
  }
  IsometryReport rep;
  rep.mean_f = mf.mean();
  rep.se_mean_f = mf.se();
  rep.mean_g = mg.mean();
  rep.se_mean_g = mg.se();
  rep.cross_moment = mfg.mean();
  rep.se_cross = mfg.se();
  rep.replicates = replicates;
  rep.target = (f.order() == g.order()) ? factorial(f.order()) * inner_product(f, g) : 0.0;
  return rep;
}

}  // namespace poisbound
