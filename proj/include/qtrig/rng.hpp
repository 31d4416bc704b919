#pragma once

#include <cstdint>

namespace qtrig {

// Weyl increment used by the SplitMix64 generator.
inline constexpr std::uint64_t kSeedGamma = 0x9E3779B97F4A7C15ull;

/// SplitMix64 finalizer: full-avalanche 64-bit mix.
constexpr std::uint64_t mix_bits(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derives an independent child seed from a parent seed and any number of
/// key words (step index, rank, realization number, ...). Counter-based:
/// pure function of its inputs, so derived streams are reproducible no
/// matter where or in which order they are created.
template <class... Words>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Words... words) {
  std::uint64_t h = mix_bits(seed + kSeedGamma);
  ((h = mix_bits(h + kSeedGamma + static_cast<std::uint64_t>(words))), ...);
  return h;
}

/// Maps 64 random bits to a double in [0, 1) with 53-bit resolution.
constexpr double u01_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Small deterministic stream generator (SplitMix64). Not cryptographic;
/// used for index sampling and synthetic data where reproducibility per
/// seed is the contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kSeedGamma;
    return mix_bits(state_);
  }

  /// Uniform in [0, 1).
  double next_u01() { return u01_from_bits(next_u64()); }

  /// Uniform integer in [0, n), unbiased (Lemire's method with rejection).
  std::uint64_t next_below(std::uint64_t n) {
    using u128 = unsigned __int128;
    u128 m = static_cast<u128>(next_u64()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        m = static_cast<u128>(next_u64()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform real in [lo, hi).
  double next_in(double lo, double hi) { return lo + (hi - lo) * next_u01(); }

 private:
  std::uint64_t state_;
};

}  // namespace qtrig
