#pragma once

#include <cstdint>

namespace wsol {

/// Counter-based pseudo-random generator.
///
/// Output number `i` of stream `(seed, stream)` is
///
///     key  = splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019))
///     u64  = splitmix64(key + i * 0x9E3779B97F4A7C15)
///
/// where splitmix64(x) is one step of Steele, Lea and Flood's SplitMix64 from
/// state x: add 0x9E3779B97F4A7C15, then xor-shift 30/27/31 with multipliers
/// 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB. Everything is 64-bit unsigned arithmetic modulo 2^64,
/// so the sequence is identical on every platform.
///
/// uniform() maps the top 53 bits to [0, 1). gaussian() uses the Box-Muller
/// transform on two consecutive uniforms (u1 is shifted to (0, 1] so the log
/// is finite) and returns the cosine branch; the sine branch is cached and
/// returned by the next call.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double gaussian(double mean = 0.0, double stddev = 1.0) noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

  /// Independent generator for a sub-task (e.g. one sample of a batch).
  CounterRng split(std::uint64_t stream) const noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace wsol
