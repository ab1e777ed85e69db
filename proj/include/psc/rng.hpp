#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace psc {

/// Deterministic RNG with portable derived streams.
///
/// std::mt19937_64 output is fixed by the standard, but the standard
/// distributions are not; the draw helpers here are implemented explicitly so
/// that seeded runs produce identical bytes on every platform and toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from (seed, stream_id); used so per-sample
  /// generation stays deterministic under any worker scheduling.
  static Rng derive(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(splitmix64(seed + 0x9E3779B97F4A7C15ull * (stream_id + 1)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Unbiased draw from [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / n * n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform_real(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  /// Fisher-Yates shuffle with this engine's portable index draws.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace psc
