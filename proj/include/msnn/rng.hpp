#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace msnn {

/// Seeded RNG with platform-independent draws. std::mt19937_64 is fully
/// specified by the standard; the distributions are not, so scaling is done
/// by hand here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
  uint64_t below(uint64_t n) { return gen_() % n; }

  /// Fisher-Yates shuffle, deterministic for a given seed.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace msnn
