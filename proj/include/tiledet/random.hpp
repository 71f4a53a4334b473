#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tiledet {

/// Portable seeded generator. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; every distribution below is written out
/// here so draws are identical across standard libraries.
///
/// Draw costs (engine outputs consumed):
///   uniform()          1
///   uniform_int(n)     1 or more (rejection sampling)
///   normal()           2 (Box-Muller, cosine branch only, no caching)
///   poisson(mean)      k+1 uniforms for a result k (Knuth)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0,1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  int poisson(double mean);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates, last index first.
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent sub-seed from a base seed and a key string
/// (FNV-1a over the key, mixed with the base through splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::string_view key);

}  // namespace tiledet
