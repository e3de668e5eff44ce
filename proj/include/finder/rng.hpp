#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace finder {

/// Deterministic 64-bit generator (splitmix64, Vigna 2015). The output is a
/// bijective hash of a counter advancing by a fixed odd constant, so streams
/// are identical on every platform -- std::uniform_real_distribution is not.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 mantissa bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform double in [-1, 1).
  double uniform_sym() { return -1.0 + 2.0 * uniform01(); }

  /// Standard normal via Box-Muller (two uniform draws per call, no caching,
  /// so the stream position is a pure function of the call count).
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n). n must be > 0. Fixed-point multiply keeps the
  /// mapping platform-stable; the modulo-free bias is < 2^-64 per draw.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

/// Stable sub-stream seed for (base seed, stream tag) pairs.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  SplitMix64 g(base ^ (tag * 0xD1B54A32D192ED03ull));
  return g.next_u64();
}

}  // namespace finder
