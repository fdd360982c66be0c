#pragma once

#include <cmath>
#include <cstdint>

namespace qleak {

// SplitMix64 mixing constant; also the documented constant for deriving
// per-trial seeds in the audit suite (see trial_seed below).
inline constexpr std::uint64_t kSeedMixGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += kSeedMixGolden);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Per-trial seed derivation: one SplitMix64 step away from
// master ^ (index+1)*golden. Trials are reproducible regardless of the
// execution order or thread count.
inline std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial_index) {
  std::uint64_t s = master_seed ^ ((trial_index + 1) * kSeedMixGolden);
  return splitmix64_next(s);
}

// Small deterministic generator. Gaussian variates use Box-Muller on
// explicit uniform bits so streams do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // uniform integer in [0, n), n small
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  double gauss() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    constexpr double kTwoPi = 6.283185307179586476925287;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qleak
