#pragma once

#include <cstdint>

namespace fopsim {

// Counter-based randomness: every draw is a pure function of
// (seed, stream, index, lane), so results do not depend on evaluation order
// or on how work is split across threads.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL))) {}

  constexpr std::uint64_t bits(std::uint64_t index, std::uint32_t lane = 0) const {
    return splitmix64(key_ ^ splitmix64(index * 4 + lane + 0x632BE59BD9B4E019ULL));
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  constexpr double uniform(std::uint64_t index, std::uint32_t lane = 0) const {
    return static_cast<double>(bits(index, lane) >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on lanes (lane, lane + 1).
  double normal(std::uint64_t index, std::uint32_t lane = 0) const;

 private:
  std::uint64_t key_;
};

}  // namespace fopsim
