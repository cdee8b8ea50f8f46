#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "poisbound/rng.hpp"

namespace poisbound {

using Point = std::span<const double>;

// Axis-aligned box in R^m.
struct Box {
  std::vector<double> lo, hi;
  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(Point x) const;
  double volume() const;
};

// Control measure mu = intensity * density(x) dx on a box.  The density is
// a probability density on the box, bounded by density_bound.
class ControlMeasure {
 public:
  ControlMeasure(Box box, std::function<double(Point)> density, double density_bound,
                 double intensity);

  static ControlMeasure uniform(Box box, double intensity);
  // 1-d density that is constant on [breaks[i], breaks[i+1]); values must be
  // nonnegative and integrate to one over the box.
  static ControlMeasure piecewise_constant_1d(double lo, double hi, std::vector<double> breaks,
                                              std::vector<double> values, double intensity);

  const Box& box() const { return box_; }
  int dim() const { return box_.dim(); }
  double intensity() const { return intensity_; }
  double density_bound() const { return density_bound_; }
  double density(Point x) const { return density_(x); }

 private:
  Box box_;
  std::function<double(Point)> density_;
  double density_bound_;
  double intensity_;
};

// Finite point multiset; points are stored flat, dim coordinates each.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return dim_ ? coords_.size() / dim_ : 0; }
  Point point(std::size_t i) const { return Point(coords_.data() + i * dim_, dim_); }
  const std::vector<double>& coords() const { return coords_; }

  void push_back(Point x);
  bool has_duplicate_points() const;

 private:
  int dim_ = 1;
  std::vector<double> coords_;
};

// Axis-aligned window A inside the control box; membership uses the
// half-open convention lo <= x < hi so grid windows partition exactly.
struct Window {
  Box box;
  bool contains(Point x) const;
};

// Draws a configuration of the Poisson process with control measure
// `measure`: the total count is Poisson(intensity), point locations are
// i.i.d. from the density by rejection against density_bound.
Configuration sample_configuration(const ControlMeasure& measure, RngStream& rng);

// Convenience: an independent stream addressed by (seed, replicate).
Configuration sample_configuration(const ControlMeasure& measure, std::uint64_t seed,
                                   std::uint64_t replicate);

// F_z mechanics: returns config + delta_z, input untouched.
Configuration add_point(const Configuration& config, Point z, const Box& box);

long window_count(const Configuration& config, const Window& window);

// mu(A) = intensity * \int_A density, adaptive quadrature to 1e-8 relative.
double control_mass(const ControlMeasure& measure, const Window& window);

}  // namespace poisbound
