#include "wsol/rng.hpp"

#include <cmath>
#include <numbers>

namespace wsol {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))) {}

std::uint64_t CounterRng::next_u64() noexcept {
  return splitmix64(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL);
}

double CounterRng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::gaussian(double mean, double stddev) noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return mean + stddev * (r * std::cos(angle));
}

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
  // Rejection keeps the result exactly uniform.
  const std::uint64_t limit = ~0ULL - (~0ULL % n);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

CounterRng CounterRng::split(std::uint64_t stream) const noexcept {
  CounterRng child(0);
  child.key_ = splitmix64(key_ ^ splitmix64(stream + 0xD1B54A32D192ED03ULL));
  return child;
}

}  // namespace wsol
