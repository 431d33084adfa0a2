#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tkgt {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derives a child seed from a parent seed and a lane index. Used for
// per-sample and per-epoch streams so results are independent of
// worker scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t lane) {
  return splitmix64(seed ^ splitmix64(lane + 1));
}
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

// Deterministic RNG. The raw mt19937_64 stream is pinned by the standard;
// all derived draws below are implemented here rather than with the
// std distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), n >= 1
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform over [0, n) excluding `skip`.
  std::size_t uniform_index_excluding(std::size_t n, std::size_t skip) {
    std::size_t r = uniform_index(n - 1);
    return r >= skip ? r + 1 : r;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename V>
  void shuffle(std::vector<V>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace tkgt
