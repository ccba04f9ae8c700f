#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace dadao {

/// Counter-based random generator.
///
/// Output k of stream (seed, stream) is a pure function of (seed, stream, k):
/// a SplitMix64 finalizer applied to a keyed counter. Independent
/// substreams are obtained with split(), which derives a new key without
/// consuming any output of the parent. Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(mix(seed) ^ (stream * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + 0x9E3779B97F4A7C15ull * ++counter_); }

  /// Child generator keyed on (this key, stream id); the parent is untouched.
  CounterRng split(std::uint64_t stream) const { return CounterRng(key_, stream + 1); }

  std::uint64_t counter() const { return counter_; }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound); bound > 0. Unbiased (rejection).
  std::uint64_t uniform_index(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = (*this)();
      if (r >= threshold) return r % bound;
    }
  }

  /// Exponential with the given rate (> 0).
  double exponential(double rate) { return -std::log(uniform()) / rate; }

  /// Standard normal (Box-Muller, one output per two uniforms).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fixed substream ids so that schedules, data and mini-batches never share draws.
namespace streams {
inline constexpr std::uint64_t kGradientTimes = 1;
inline constexpr std::uint64_t kCommTimes = 2;
inline constexpr std::uint64_t kGradientNodes = 3;
inline constexpr std::uint64_t kCommEdges = 4;
inline constexpr std::uint64_t kMiniBatch = 5;
inline constexpr std::uint64_t kData = 6;
inline constexpr std::uint64_t kGraph = 7;
}  // namespace streams

}  // namespace dadao
