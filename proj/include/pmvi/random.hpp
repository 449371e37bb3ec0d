#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace pmvi {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(seed) ^ (stream * 0xd1b54a32d192ed03ULL));
}

/// Seeded generator passed explicitly to every sampling routine.
///
/// Uniform doubles are built from the top 53 bits of the engine output
/// rather than through std::uniform_real_distribution, so a given seed
/// yields the same stream with any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Inverse-CDF draw from a probability vector. Mass lost to rounding
  /// goes to the last index with positive probability.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    int last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      last_positive = static_cast<int>(i);
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return last_positive;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pmvi
