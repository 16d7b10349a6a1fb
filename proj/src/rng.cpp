#include "scatterforge/rng.hpp"

#include <cmath>
#include <numbers>

#include "scatterforge/errors.hpp"

namespace scatterforge {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  // FNV-1a over the label, then mixed with the parent seed and index.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  std::uint64_t z = splitmix64_finalize(seed ^ h);
  return splitmix64_finalize(z + (index + 1) * kGolden);
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return splitmix64_finalize(seed_ + counter_ * kGolden);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  require(lo <= hi, "uniform: lo must not exceed hi");
  return lo + (hi - lo) * next_double();
}

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  double u1 = 1.0 - next_double();
  double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  require(bound > 0, "below: bound must be positive");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    std::uint64_t x = next_u64();
    if (x < limit) return x % bound;
  }
}

Rng Rng::derive(std::string_view label) const { return Rng(derive_seed(seed_, label)); }

Rng Rng::derive(std::string_view label, std::uint64_t index) const {
  return Rng(derive_seed(seed_, label, index));
}

}  // namespace scatterforge
