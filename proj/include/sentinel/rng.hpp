#pragma once

#include <cstdint>

namespace sentinel {

__extension__ using uint128 = unsigned __int128;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based generator. The n-th draw of key k is mix64(k + (n+1)*G),
/// which is exactly the n-th output of a SplitMix64 stream seeded with k, so
/// any value can be recomputed without replaying the stream. Independent
/// substreams are derived with split().
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t key() const noexcept { return key_; }

  constexpr std::uint64_t at(std::uint64_t counter) const noexcept {
    return mix64(key_ + (counter + 1) * kGolden);
  }

  constexpr CounterRng split(std::uint64_t stream) const noexcept {
    return CounterRng(mix64(key_ ^ mix64(stream + kGolden)));
  }

  /// Uniform double in [0,1) with 53 random bits.
  constexpr double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>(at(counter) >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
};

/// Sequential convenience wrapper over CounterRng.
class RngStream {
 public:
  explicit RngStream(CounterRng rng) noexcept : rng_(rng) {}
  explicit RngStream(std::uint64_t seed) noexcept : rng_(seed) {}

  std::uint64_t next() noexcept { return rng_.at(counter_++); }
  double uniform() noexcept { return rng_.uniform(counter_++); }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). Uses a multiply-shift reduction.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<uint128>(next()) * n) >> 64);
  }
  /// Standard normal via Box-Muller (one value per two uniforms).
  double normal() noexcept;

 private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace sentinel
