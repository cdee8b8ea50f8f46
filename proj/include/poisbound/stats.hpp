#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

namespace poisbound {

// Welford accumulator with an associative merge, so chunked parallel
// reductions give the same result regardless of worker scheduling.
class MeanVar {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
    if (x < min_) min_ = x;
    if (x > max_) max_ = x;
  }

  void merge(const MeanVar& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double d = o.mean_ - mean_;
    const double nt = na + nb;
    m2_ += o.m2_ + d * d * na * nb / nt;
    mean_ += d * nb / nt;
    n_ += o.n_;
    if (o.min_ < min_) min_ = o.min_;
    if (o.max_ > max_) max_ = o.max_;
  }

  std::size_t count() const { return n_; }
  double mean() const { return n_ ? mean_ : 0.0; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double se() const { return n_ ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
  double min() const { return min_; }
  double max() const { return max_; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double min_ = std::numeric_limits<double>::infinity();
  double max_ = -std::numeric_limits<double>::infinity();
};

// Sample covariance accumulator (two series), mergeable like MeanVar.
class Cov {
 public:
  void add(double x, double y) {
    ++n_;
    const double dx = x - mx_;
    mx_ += dx / static_cast<double>(n_);
    my_ += (y - my_) / static_cast<double>(n_);
    c_ += dx * (y - my_);
  }
  void merge(const Cov& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double nt = na + nb;
    c_ += o.c_ + (o.mx_ - mx_) * (o.my_ - my_) * na * nb / nt;
    mx_ += (o.mx_ - mx_) * nb / nt;
    my_ += (o.my_ - my_) * nb / nt;
    n_ += o.n_;
  }
  std::size_t count() const { return n_; }
  double covariance() const { return n_ > 1 ? c_ / static_cast<double>(n_ - 1) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mx_ = 0.0, my_ = 0.0, c_ = 0.0;
};

inline unsigned effective_thread_count() {
  if (const char* env = std::getenv("THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Runs body(i) for i in [0, count) over a fixed chunk layout.  The chunk
// layout (and therefore any chunk-indexed reduction) does not depend on the
// number of worker threads.
inline void parallel_replicates(std::size_t count,
                                const std::function<void(std::size_t chunk, std::size_t lo, std::size_t hi)>& body,
                                std::size_t n_chunks = 64) {
  if (count == 0) return;
  if (n_chunks > count) n_chunks = count;
  const unsigned n_threads = std::min<unsigned>(effective_thread_count(), static_cast<unsigned>(n_chunks));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      const std::size_t lo = c * count / n_chunks;
      const std::size_t hi = (c + 1) * count / n_chunks;
      body(c, lo, hi);
    }
  };
  if (n_threads <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

// Least-squares fit of y against x; used for log-log rate estimation.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need at least two matched points");
  const std::size_t n = x.size();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  if (n > 2) f.slope_se = std::sqrt(ss / static_cast<double>(n - 2) / sxx);
  return f;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace poisbound
