#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace locgan {

/// Deterministic random source. Wraps a fixed-algorithm 64-bit engine and
/// implements the distributions itself, so streams are bit-reproducible for
/// a given seed regardless of platform or standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  /// Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) {
    // rejection sampling to kill modulo bias
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Poisson-distributed count (Knuth's method; fine for small means).
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Derive an independent stream for a sub-task.
  Rng fork(uint64_t salt) {
    return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL));
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Stateless 64-bit mix, used for procedural textures keyed on position.
inline uint64_t hash_mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  return hash_mix(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/// Deterministic value in [0, 1) from a pair of integers and a seed.
inline double hash01(uint64_t seed, int64_t ix, int64_t iy) {
  uint64_t h = hash_combine(seed, static_cast<uint64_t>(ix) * 0x85ebca77c2b2ae63ULL);
  h = hash_combine(h, static_cast<uint64_t>(iy) * 0xc2b2ae3d27d4eb4fULL);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace locgan
