#pragma once

#include <cstdint>
#include <initializer_list>

namespace monotree {

// Counter-based pseudo randomness. Every draw is a pure function of
// (seed, key..., counter), so any stream can be re-created lazily, out of
// order, or replayed: the same key always yields the same values.

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t combine_keys(std::uint64_t seed,
                                  std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k));
  return h;
}

// Uniform double in [0, 1) from 53 high bits.
inline double u64_to_unit(std::uint64_t v) {
  return static_cast<double>(v >> 11) * 0x1.0p-53;
}

inline double keyed_uniform(std::uint64_t seed,
                            std::initializer_list<std::uint64_t> keys) {
  return u64_to_unit(combine_keys(seed, keys));
}

// Derives a sub-seed, e.g. per Monte-Carlo trial or per dimension.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> keys) {
  return combine_keys(seed, keys);
}

// Sequential stream over a fixed key, for consumers that need many draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys)
      : base_(combine_keys(seed, keys)) {}

  std::uint64_t next_u64() { return mix64(base_ ^ counter_++); }
  double uniform() { return u64_to_unit(next_u64()); }
  // Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace monotree
