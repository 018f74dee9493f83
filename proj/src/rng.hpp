#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace metaid {

// One splitmix64 scramble round. Used to fold ids into seeds so that
// derived streams are decorrelated from each other and from the base seed.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic seed for a sub-stream identified by a path of ids,
// e.g. derive_seed(seed, {node, rating, round}).
inline uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path) {
  uint64_t s = mix64(base);
  for (uint64_t p : path) s = mix64(s ^ p);
  return s;
}

// mt19937_64 with the helper draws every module uses. The engine is fully
// specified by the standard, and the draws below avoid the
// implementation-defined std distributions, so streams are reproducible
// across platforms and can be re-derived by reference implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // Uniform in [0, n). Modulo bias is negligible for n far below 2^64.
  uint64_t below(uint64_t n) { return engine_() % n; }

  // Uniform in [0, 1) with 53 bits of precision.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace metaid
