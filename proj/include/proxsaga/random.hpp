#pragma once

#include <cstdint>
#include <random>

namespace proxsaga {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Reproducible sample stream.
///
/// Stream `k` of seed `s` is a 64-bit Mersenne Twister seeded with
/// splitmix64(s xor k). Sequential solvers use stream 0 and asynchronous worker
/// `w` uses stream `w`, so a one-thread asynchronous run draws the same samples
/// as the sequential solver with the same seed.
class SampleStream {
 public:
  using result_type = std::uint64_t;

  explicit SampleStream(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(splitmix64(seed ^ stream)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, n) by rejection, free of modulo bias. n must be positive.
  std::size_t uniform_index(std::size_t n) {
    const std::uint64_t bound = n;
    // 2^64 mod n: draws below it would over-represent small residues.
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return static_cast<std::size_t>(r % bound);
    }
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64& engine() noexcept { return engine_; }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace proxsaga
