#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rotavg {

/// Counter-based generator: the value at position c of a stream is
/// splitmix64(key + (c + 1) * golden). Streams are split by hashing a
/// stream id into a fresh key, so (seed, stream) fully determines output.
///
/// Normal deviates use Box-Muller rather than <random> distributions,
/// whose output is implementation-defined.
class CounterRng {
 public:
  static constexpr const char* kAlgorithm = "splitmix64-ctr-v1";

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + kGolden))) {}

  /// Independent child stream.
  CounterRng split(std::uint64_t stream) const { return CounterRng(key_, stream); }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * kGolden);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // rejection keeps the distribution exact
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = 0;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  std::uint64_t position() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rotavg
