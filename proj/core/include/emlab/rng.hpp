#pragma once

/**
 * Deterministic random streams.
 *
 * Every stochastic routine in the library takes an explicit Rng; there is no
 * global generator. Identical seeds give bitwise-identical draws on every
 * platform: the engine is std::mt19937_64 (fully specified by the standard)
 * and all real-valued draws are derived from raw 64-bit words here rather
 * than through std::*_distribution, whose output is implementation-defined.
 *
 * derive_seed(seed, stream) splits one user-facing seed into independent
 * sub-streams (per episode, per policy, per check) so that parallel work can
 * reproduce the sequential result exactly.
 */

#include <cmath>
#include <cstdint>
#include <random>

namespace emlab {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over a Weyl-offset combination of (seed, stream).
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53 bits of mantissa.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe as a log() argument.
  double next_unit_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform integer in [lo, hi], both inclusive.
  int next_int(int lo, int hi) {
    const int span = hi - lo + 1;
    int v = lo + static_cast<int>(next_unit() * span);
    return v > hi ? hi : v;
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit_open();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace emlab
