#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string_view>

/**
 * Deterministic, platform-independent randomness.
 *
 * Every consumer of noise opens its own `RngStream`, keyed by the run seed
 * plus a purpose tag and an index (rollout number, node ordinal, ...).
 * Streams are stateless with respect to each other, so the order in which
 * different purposes draw can never change any value: resuming a run or
 * reordering oracle calls reproduces the same numbers bit for bit.
 *
 * std::uniform_real_distribution / normal_distribution are deliberately not
 * used; their outputs are unspecified across standard libraries.  SplitMix64
 * plus Box-Muller gives identical sequences everywhere.
 */

namespace imcts {

/** SplitMix64 step (public-domain constants). */
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/** FNV-1a over the tag text, used to separate purpose domains. */
inline constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0,
            std::uint64_t subindex = 0) {
    state_ = seed;
    mix(fnv1a64(purpose));
    mix(index);
    mix(subindex);
  }

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  /** Uniform in [0, 1) with 53 random bits. */
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /** Uniform integer in [lo, hi], inclusive. */
  int uniform_int(int lo, int hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
    std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  /** Standard normal via Box-Muller (fresh pair each call, no caching). */
  double gauss() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  void mix(std::uint64_t v) {
    state_ ^= v + 0x9E3779B97F4A7C15ull + (state_ << 6) + (state_ >> 2);
    splitmix64_next(state_);
  }

  std::uint64_t state_ = 0;
};

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace imcts
