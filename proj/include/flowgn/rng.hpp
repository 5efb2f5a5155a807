#pragma once

#include <cstdint>
#include <limits>

namespace flowgn {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive an independent stream key from a master seed and a tuple of
/// counters (node, iteration, layer, ...). Every walk and every sampled
/// quantity gets its own key, so results never depend on scheduling.
template <typename... Counters>
constexpr std::uint64_t derive_seed(std::uint64_t master, Counters... counters) noexcept {
  std::uint64_t key = mix64(master ^ 0x6a09e667f3bcc909ULL);
  ((key = mix64(key ^ (static_cast<std::uint64_t>(counters) + 0x9e3779b97f4a7c15ULL))), ...);
  return key;
}

/// Counter-based generator: output i is mix64(key + i·γ). Satisfies
/// UniformRandomBitGenerator so it can drive <random> facilities too.
class CounterRng {
public:
  using result_type = std::uint64_t;

  constexpr explicit CounterRng(std::uint64_t key) noexcept : state_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n) via multiply-shift; n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

private:
  std::uint64_t state_;
};

} // namespace flowgn
