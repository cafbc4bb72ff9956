#include "fopsim/rng.hpp"

#include <cmath>
#include <numbers>

namespace fopsim {

double CounterRng::normal(std::uint64_t index, std::uint32_t lane) const {
  // Shift away from zero so log() stays finite.
  const double u1 = uniform(index, lane) + 0x1.0p-54;
  const double u2 = uniform(index, lane + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace fopsim
