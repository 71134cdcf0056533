#pragma once

#include <cstdint>
#include <vector>

namespace nai {

// Deterministic pseudo-random source (splitmix64 core). All draws are
// hand-rolled so sequences do not depend on the standard library version:
// a fixed seed reproduces identical bytes on any platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller (one value per call, no cached pair).
  double normal(double mean = 0.0, double stddev = 1.0);

  /// Uniform integer in [0, n).
  std::uint64_t bounded(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derives an independent stream seed from (seed, salt).
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t salt);

private:
  std::uint64_t state_;
};

} // namespace nai
