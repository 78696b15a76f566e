#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace coalsim {

// splitmix64 finalizer, used both as a mixer and to derive child seeds
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based seed derivation: independent streams per (master, a, b).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(master) ^ a) ^ b);
}

// Thin deterministic wrapper around mt19937_64. All variate generation is
// spelled out here so that identical seeds give bit-identical streams on any
// platform (std::uniform_real_distribution et al. are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  // uniform on (0, 1]
  double u01() {
    return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(u01()) / rate; }

  // uniform integer in [0, n), unbiased
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace coalsim
