#pragma once

#include <cstdint>
#include <string_view>

namespace scatterforge {

// Counter-based generator. Output k of a stream with seed s is
//
//   splitmix64_finalize(s + (k + 1) * 0x9E3779B97F4A7C15)
//
// where splitmix64_finalize is the SplitMix64 output mix (xor-shift 30/27/31
// with multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB). Only 64-bit
// integer arithmetic is involved, so streams are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double next_double();
  // Uniform in [lo, hi].
  double uniform(double lo, double hi);
  // Standard normal (Box-Muller; consumes two outputs).
  double normal();
  // Uniform integer in [0, bound), bound > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);

  // Independent child streams keyed by a label (and optional index).
  Rng derive(std::string_view label) const;
  Rng derive(std::string_view label, std::uint64_t index) const;

  void reset() { counter_ = 0; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_finalize(std::uint64_t z);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

}  // namespace scatterforge
