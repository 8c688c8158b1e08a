// Seedable random source with labeled substreams.
//
// Every draw path is pinned so identical seeds give identical streams on any
// platform: the engine is std::mt19937_64 (bit-exact per the standard),
// uniforms take the top 53 bits, normals use the Marsaglia polar transform,
// and bounded integers use rejection sampling. The standard library
// distribution classes are never used because their output is
// implementation-defined.
//
// A substream is a pure function of (seed, label): splitting does not touch
// the parent's draw state, so work can fan out across threads and still
// reproduce exactly.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "preopt/linalg.hpp"

namespace preopt {

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Substream keyed by (seed, label). Independent of how much the parent has
  // drawn; the same label always yields the same stream.
  RandomSource split(std::string_view label) const {
    return RandomSource(detail::splitmix64(seed_ ^ detail::splitmix64(detail::fnv1a64(label))));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via the Marsaglia polar method (spare cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  // Unbiased uniform index in [0, n) by rejection.
  std::size_t pick_index(std::size_t n) {
    if (n == 0) throw ContractError("pick_index: n must be positive");
    const std::uint64_t nn = static_cast<std::uint64_t>(n);
    const std::uint64_t threshold = (0 - nn) % nn;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return static_cast<std::size_t>(r % nn);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline DenseVector standard_normal(RandomSource& rng, std::size_t dim) {
  if (dim == 0) throw ContractError("standard_normal: dim must be positive");
  DenseVector out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = rng.normal();
  return out;
}

}  // namespace preopt
