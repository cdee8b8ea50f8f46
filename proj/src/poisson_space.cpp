#include "poisbound/poisson_space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "poisbound/quadrature.hpp"

namespace poisbound {

bool Box::contains(Point x) const {
  for (int d = 0; d < dim(); ++d)
    if (x[d] < lo[d] || x[d] > hi[d]) return false;
  return true;
}

double Box::volume() const {
  double v = 1.0;
  for (int d = 0; d < dim(); ++d) v *= hi[d] - lo[d];
  return v;
}

ControlMeasure::ControlMeasure(Box box, std::function<double(Point)> density, double density_bound,
                               double intensity)
    : box_(std::move(box)), density_(std::move(density)), density_bound_(density_bound),
      intensity_(intensity) {
  if (intensity_ < 0.0) throw std::invalid_argument("ControlMeasure: intensity must be >= 0");
  if (density_bound_ <= 0.0) throw std::invalid_argument("ControlMeasure: density bound must be > 0");
  for (int d = 0; d < box_.dim(); ++d)
    if (!(box_.lo[d] < box_.hi[d]))
      throw std::invalid_argument("ControlMeasure: degenerate box");
}

ControlMeasure ControlMeasure::uniform(Box box, double intensity) {
  const double inv_vol = 1.0 / box.volume();
  return ControlMeasure(std::move(box), [inv_vol](Point) { return inv_vol; }, inv_vol, intensity);
}

ControlMeasure ControlMeasure::piecewise_constant_1d(double lo, double hi,
                                                     std::vector<double> breaks,
                                                     std::vector<double> values, double intensity) {
  if (values.size() != breaks.size() + 1)
    throw std::invalid_argument("piecewise_constant_1d: need one value per segment");
  double bound = 0.0;
  for (double v : values) {
    if (v < 0.0) throw std::invalid_argument("piecewise_constant_1d: negative density value");
    bound = std::max(bound, v);
  }
  auto density = [breaks = std::move(breaks), values = std::move(values)](Point x) {
    std::size_t seg = 0;
    while (seg < breaks.size() && x[0] >= breaks[seg]) ++seg;
    return values[seg];
  };
  return ControlMeasure(Box{{lo}, {hi}}, std::move(density), bound, intensity);
}

void Configuration::push_back(Point x) {
  if (static_cast<int>(x.size()) != dim_)
    throw std::invalid_argument("Configuration: point dimension mismatch");
  coords_.insert(coords_.end(), x.begin(), x.end());
}

bool Configuration::has_duplicate_points() const {
  const std::size_t n = size();
  if (n < 2) return false;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Point pa = point(a), pb = point(b);
    return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
  });
  for (std::size_t i = 1; i < n; ++i) {
    const Point a = point(order[i - 1]), b = point(order[i]);
    if (std::equal(a.begin(), a.end(), b.begin())) return true;
  }
  return false;
}

bool Window::contains(Point x) const {
  for (int d = 0; d < box.dim(); ++d)
    if (x[d] < box.lo[d] || x[d] >= box.hi[d]) return false;
  return true;
}

Configuration sample_configuration(const ControlMeasure& measure, RngStream& rng) {
  const int m = measure.dim();
  Configuration config(m);
  const long count = rng.poisson(measure.intensity());
  std::vector<double> x(m);
  for (long i = 0; i < count; ++i) {
    for (;;) {
      for (int d = 0; d < m; ++d) x[d] = rng.uniform(measure.box().lo[d], measure.box().hi[d]);
      const double p = measure.density(Point(x));
      if (p > measure.density_bound() * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "sample_configuration: density value " << p << " exceeds declared bound "
            << measure.density_bound() << " at (";
        for (int d = 0; d < m; ++d) msg << (d ? "," : "") << x[d];
        msg << ")";
        throw std::runtime_error(msg.str());
      }
      if (rng.uniform() * measure.density_bound() <= p) break;
    }
    config.push_back(Point(x));
  }
  return config;
}

Configuration sample_configuration(const ControlMeasure& measure, std::uint64_t seed,
                                   std::uint64_t replicate) {
  RngStream rng(seed, streams::kSampling, replicate);
  return sample_configuration(measure, rng);
}

Configuration add_point(const Configuration& config, Point z, const Box& box) {
  if (!box.contains(z)) throw std::invalid_argument("add_point: point outside control box");
  Configuration out = config;
  out.push_back(z);
  return out;
}

long window_count(const Configuration& config, const Window& window) {
  long n = 0;
  for (std::size_t i = 0; i < config.size(); ++i)
    if (window.contains(config.point(i))) ++n;
  return n;
}

double control_mass(const ControlMeasure& measure, const Window& window) {
  const Box& b = window.box;
  for (int d = 0; d < b.dim(); ++d) {
    if (b.lo[d] < measure.box().lo[d] - 1e-12 || b.hi[d] > measure.box().hi[d] + 1e-12)
      throw std::invalid_argument("control_mass: window not contained in control box");
    if (!(b.lo[d] < b.hi[d])) throw std::invalid_argument("control_mass: empty window");
  }
  auto f = [&](const std::vector<double>& x) { return measure.density(Point(x)); };
  const QuadResult q = integrate_box(f, b.lo, b.hi, 1e-8, 1e-14);
  if (!q.converged) {
    std::ostringstream msg;
    msg << "control_mass: quadrature did not reach tolerance, residual " << q.abserr;
    throw std::runtime_error(msg.str());
  }
  return measure.intensity() * q.value;
}

}  // namespace poisbound
