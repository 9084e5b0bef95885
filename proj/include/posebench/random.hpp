#ifndef POSEBENCH_RANDOM_HPP
#define POSEBENCH_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace posebench {

/// SplitMix64 finalizer. Used to derive independent sub-stream seeds from a
/// user seed and a stream tag.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL));
}

/// Portable random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distributions are implemented here instead of using the
/// <random> distribution classes, whose algorithms are implementation
/// defined, so a seed reproduces the same stream on every platform:
///   - uniform01: top 53 bits of one engine draw, scaled by 2^-53.
///   - uniform_index: rejection sampling on the raw 64-bit draw.
///   - normal: Marsaglia polar method, caching the second deviate.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * f;
    has_cached_ = true;
    return u * f;
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Uniformly distributed direction on the unit sphere.
  Eigen::Vector3d unit_vector() {
    Eigen::Vector3d v;
    double n;
    do {
      v = Eigen::Vector3d(normal(), normal(), normal());
      n = v.norm();
    } while (n < 1e-12);
    return v / n;
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace posebench

#endif  // POSEBENCH_RANDOM_HPP
