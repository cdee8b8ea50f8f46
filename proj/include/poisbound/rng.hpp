#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace poisbound {

// Counter-based generator (Philox4x32-10).  Streams are addressed by
// (seed, stream id, replicate index), so every Monte Carlo replicate owns an
// independent substream and the draw sequence is identical regardless of how
// replicates are scheduled across threads.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t replicate)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        ctr2_(static_cast<std::uint32_t>(stream ^ (replicate << 20))),
        ctr3_(static_cast<std::uint32_t>((stream >> 32) ^ replicate)) {}

  std::uint64_t next_u64() {
    if (have_ == 0) refill();
    --have_;
    const std::uint32_t lo = buf_[2 * have_];
    const std::uint32_t hi = buf_[2 * have_ + 1];
    return (static_cast<std::uint64_t>(hi) << 32) | lo;
  }

  // Uniform double in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the spare value is cached per stream.
  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return spare_normal_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_normal_ = r * std::sin(two_pi * u2);
    have_normal_ = true;
    return r * std::cos(two_pi * u2);
  }

  // Poisson variate by pmf chop-down.  For large means the walk starts at the
  // mode, so the expected number of steps is O(sqrt(mean)).
  long poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
    if (mean == 0.0) return 0;
    if (mean < 20.0) {
      // classic product-of-uniforms
      const double limit = std::exp(-mean);
      double prod = 1.0;
      long k = -1;
      do {
        prod *= uniform();
        ++k;
      } while (prod > limit);
      return k;
    }
    const long mode = static_cast<long>(mean);
    const double log_pmode =
        static_cast<double>(mode) * std::log(mean) - mean - std::lgamma(static_cast<double>(mode) + 1.0);
    const double pmode = std::exp(log_pmode);
    double u = uniform();
    // alternate outward from the mode: mode, mode+1, mode-1, mode+2, ...
    double up = pmode, down = pmode;
    long kup = mode, kdown = mode;
    u -= pmode;
    if (u <= 0.0) return mode;
    for (int step = 0; step < 100000; ++step) {
      ++kup;
      up *= mean / static_cast<double>(kup);
      u -= up;
      if (u <= 0.0) return kup;
      if (kdown > 0) {
        down *= static_cast<double>(kdown) / mean;
        --kdown;
        u -= down;
        if (u <= 0.0) return kdown;
      }
    }
    return kup;  // unreachable for any sane mean; tail mass below 1e-300
  }

 private:
  void refill() {
    std::uint32_t c0 = ctr0_, c1 = ctr1_, c2 = ctr2_, c3 = ctr3_;
    std::uint32_t k0 = key0_, k1 = key1_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * c0;
      const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c2;
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      const std::uint32_t n0 = hi1 ^ c1 ^ k0;
      const std::uint32_t n2 = hi0 ^ c3 ^ k1;
      c0 = n0;
      c1 = lo1;
      c2 = n2;
      c3 = lo0;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    buf_[0] = c0;
    buf_[1] = c1;
    buf_[2] = c2;
    buf_[3] = c3;
    have_ = 2;
    if (++ctr0_ == 0) ++ctr1_;
  }

  std::uint32_t key0_, key1_;
  std::uint32_t ctr0_ = 0, ctr1_ = 0, ctr2_, ctr3_;
  std::uint32_t buf_[4] = {0, 0, 0, 0};
  int have_ = 0;
  double spare_normal_ = 0.0;
  bool have_normal_ = false;
};

// Fixed stream ids keep draw purposes separated within one experiment.
namespace streams {
inline constexpr std::uint64_t kSampling = 0x01;
inline constexpr std::uint64_t kTargets = 0x02;
inline constexpr std::uint64_t kKernels = 0x03;
inline constexpr std::uint64_t kReference = 0x04;
}  // namespace streams

}  // namespace poisbound
