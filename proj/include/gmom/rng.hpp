#pragma once

#include <cstdint>

namespace gmom {

// Deterministic stream generator used everywhere randomness is needed.
// splitmix64 core with a polar-method normal on top, so the exact output
// sequence is reproducible across platforms and standard library versions
// (std::normal_distribution is implementation-defined, which would break
// the seeded-trial contracts of the bench module).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (-1, 1), never exactly 0 or the endpoints.
  double uniform_sym();

  // Standard normal via Marsaglia's polar method.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Hash-combine for deriving child seeds (base, cell, trial, ...).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace gmom
