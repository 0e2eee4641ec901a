#ifndef FMLOC_CORE_RNG_HPP
#define FMLOC_CORE_RNG_HPP

#include <cstdint>
#include <random>

namespace fmloc {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 output function (Steele, Lea, Flood). Bijective on 64-bit words.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Per-sample seed: mix(master ^ (index * golden)). The map index -> state is
/// injective for index < 2^32 because index * golden is injective mod 2^64
/// (golden is odd) and both xor-with-constant and the mix are bijections.
constexpr std::uint64_t derive_sample_seed(std::uint64_t master_seed,
                                           std::uint64_t sample_index) noexcept {
  return splitmix64_mix(master_seed ^ (sample_index * kGoldenGamma));
}

/// Random stream with a fully specified output sequence. std::mt19937_64 is
/// pinned by the standard; the real-valued transforms below are ours, since
/// std:: distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng for_sample(std::uint64_t master_seed, std::uint64_t index) {
    return Rng(derive_sample_seed(master_seed, index));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits. One word.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]. One word.
  double uniform01_open_low() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform on [a, b). One word.
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fmloc

#endif  // FMLOC_CORE_RNG_HPP
