#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace memgan {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the named substream of a root seed ("weights", "noise", ...).
constexpr std::uint64_t substream_seed(std::uint64_t root, std::string_view name) noexcept {
  return mix64(root ^ mix64(fnv1a(name)));
}

/// Counter-based random source: draw i of a stream is a pure function of
/// (seed, i). Sequential use advances an internal counter, so a Stream can be
/// checkpointed as two integers and random access by draw index is free.
class Stream {
 public:
  constexpr Stream() = default;
  constexpr explicit Stream(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  constexpr std::uint64_t bits_at(std::uint64_t index) const noexcept {
    return mix64(seed_ ^ mix64(index));
  }

  /// Uniform in [0, 1) with 53 random bits.
  constexpr double uniform_at(std::uint64_t index) const noexcept {
    return static_cast<double>(bits_at(index) >> 11) * 0x1.0p-53;
  }

  /// Standard normal for draw `index` (Box-Muller on two derived words).
  double normal_at(std::uint64_t index) const noexcept {
    const std::uint64_t a = mix64(bits_at(index) ^ 0x5851f42d4c957f2dULL);
    const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = uniform_at(index);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t next_bits() noexcept { return bits_at(counter_++); }
  double uniform() noexcept { return uniform_at(counter_++); }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() noexcept { return normal_at(counter_++); }
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  /// Uniform integer in [0, n) (n > 0); the modulo bias is below 2^-40 for
  /// the sizes used here.
  std::uint64_t below(std::uint64_t n) noexcept { return next_bits() % n; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace memgan
