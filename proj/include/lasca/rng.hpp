#pragma once

// Seed derivation and a small counter-friendly engine. All randomness in the
// library flows from an explicit master seed through derive_seed(), so any
// sample can be regenerated from its coordinates alone.

#include <cstdint>
#include <limits>
#include <random>

namespace lasca::rng {

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed) noexcept { return mix64(seed); }

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t next, Rest... rest) noexcept {
  return derive_seed(mix64(seed ^ mix64(next + 0x632be59bd9b4e019ULL)), static_cast<std::uint64_t>(rest)...);
}

// SplitMix64 as a UniformRandomBitGenerator. Cheap to construct, which is what
// keyed per-(die, gate) sampling needs; std:: distributions sit on top of it.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

inline double keyed_normal(std::uint64_t key) {
  SplitMix64 eng(key);
  std::normal_distribution<double> nd(0.0, 1.0);
  return nd(eng);
}

inline double keyed_uniform(std::uint64_t key) {
  SplitMix64 eng(key);
  return std::uniform_real_distribution<double>(0.0, 1.0)(eng);
}

// Normal(mean, sd) truncated to [lo, hi] by rejection; falls back to clamping
// after a bounded number of draws so a badly placed window cannot spin.
template <typename Engine>
double truncated_normal(Engine& eng, double mean, double sd, double lo, double hi) {
  if (sd <= 0.0) return mean < lo ? lo : (mean > hi ? hi : mean);
  std::normal_distribution<double> nd(mean, sd);
  for (int i = 0; i < 64; ++i) {
    const double v = nd(eng);
    if (v >= lo && v <= hi) return v;
  }
  return mean < lo ? lo : (mean > hi ? hi : mean);
}

}  // namespace lasca::rng
