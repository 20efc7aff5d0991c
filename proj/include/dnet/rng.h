#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dnet {

// Seedable PRNG used everywhere randomness is needed. Backed by the
// standard Mersenne Twister (mt19937_64), with the derived distributions
// implemented here so that streams are identical across platforms and
// standard libraries.
class Rng {
public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform double in [0, 1), 53 random mantissa bits.
  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  uint64_t index(uint64_t n) {
    if (n == 0) return 0;
    uint64_t mask = ~uint64_t(0);
    uint64_t limit = mask - mask % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Fresh seed for a child stream (e.g., per-shape or per-layer RNGs).
  uint64_t fork() { return gen_(); }

private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace dnet
