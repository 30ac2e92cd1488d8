#pragma once

#include <cstdint>
#include <vector>

namespace hbmtherm {

// Deterministic 64-bit PRNG (splitmix64). Used everywhere randomness is
// needed so that plans, splits, weights and dropout masks are reproducible
// bit-for-bit across platforms; no libc / libstdc++ distribution involved.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound) via rejection sampling.
  uint64_t next_below(uint64_t bound) {
    if (bound <= 1) return 0;
    const uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform double in [0, 1), 53 random bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in [-bound, bound].
  double next_symmetric(double bound) { return (2.0 * next_double() - 1.0) * bound; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derive an independent stream from a seed and a list of tags. mix() is
  // splitmix64's finalizer, so streams for distinct tags do not overlap in
  // practice.
  static uint64_t mix(uint64_t x) {
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  static uint64_t derive(uint64_t seed, std::initializer_list<uint64_t> tags) {
    uint64_t k = mix(seed ^ 0x6a09e667f3bcc909ull);
    for (uint64_t t : tags) k = mix(k ^ (t + 0x9e3779b97f4a7c15ull));
    return k;
  }

 private:
  uint64_t state_;
};

}  // namespace hbmtherm
