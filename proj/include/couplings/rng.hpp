#pragma once

#include <cstdint>
#include <random>

namespace couplings {

// Seeded PRNG with a fixed uniform mapping. std::mt19937_64's output
// sequence is pinned by the standard, and the explicit 53-bit mapping keeps
// draws identical across platforms (std::uniform_real_distribution is not).
class Rng64 {
 public:
  explicit Rng64(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double next_unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

 private:
  std::mt19937_64 eng_;
};

inline constexpr const char* kRngName = "mt19937_64-u53";

}  // namespace couplings
