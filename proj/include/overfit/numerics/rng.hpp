#pragma once

#include <cstdint>
#include <limits>

namespace overfit::numerics {

/// SplitMix64 finaliser; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based SplitMix64 generator: output k is mix64(key + k * golden).
/// Bit-identical on every platform; satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed) : key_(mix64(seed)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + (++counter_) * kGolden); }

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Seed of the index-th child stream of `base`:
///   child = mix64(base XOR mix64(index + 1)).
/// Distinct indices give distinct children for a fixed base.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix64(base ^ mix64(index + 1));
}

/// Uniform draw in the open interval (0, 1) from the top 53 bits.
double uniform_open01(CounterRng& rng);

/// Standard normal draw (Boost ziggurat, platform independent).
double standard_normal(CounterRng& rng);

/// Gamma(shape, scale) draw (Boost implementation, platform independent).
double gamma_draw(CounterRng& rng, double shape, double scale);

}  // namespace overfit::numerics
