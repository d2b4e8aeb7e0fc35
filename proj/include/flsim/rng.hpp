#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace flsim {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;
inline constexpr std::uint64_t kMixMul1 = 0xBF58476D1CE4E5B9ull;
inline constexpr std::uint64_t kMixMul2 = 0x94D049BB133111EBull;

/// SplitMix64 finalizer (Steele et al.), the bit mixer used throughout.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= kMixMul1;
  z ^= z >> 27;
  z *= kMixMul2;
  z ^= z >> 31;
  return z;
}

/// Per-(node, round) training seed. The formula is part of the record
/// format: mix64(master ^ node*G ^ round*M1), fixed forever.
inline std::uint64_t derive_node_seed(std::uint64_t master_seed,
                                      std::uint64_t node_index,
                                      std::uint64_t round) {
  return mix64(master_seed ^ (node_index * kGoldenGamma) ^ (round * kMixMul1));
}

/// Deterministic 64-bit stream generator (SplitMix64).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  /// Uniform double in [0, 1), 53 significant bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

/// Fisher-Yates shuffle driven by the given stream.
template <typename T>
void fisher_yates_shuffle(std::vector<T>& values, SplitMix64& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace flsim
