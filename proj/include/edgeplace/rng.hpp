#pragma once

#include <cstdint>
#include <random>

namespace edgeplace {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a root seed and an index
/// (per-episode, per-zone, ...). Pure function of its arguments.
inline uint64_t mix_seed(uint64_t seed, uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x517cc1b727220a95ULL));
}

/// Seeded generator with hand-rolled draws. std::* distributions are
/// implementation-defined; these are not, so streams stay stable.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t bits() { return gen_(); }

  /// Uniform double in [0, 1), 53 bits of randomness.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) {
    return static_cast<int>(
        (static_cast<unsigned __int128>(gen_()) * static_cast<uint64_t>(n)) >> 64);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace edgeplace
