#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pqmotion {

// splitmix64 mixer, used to derive independent stream seeds from (seed, salt...).
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic RNG with portable distributions. std::mt19937_64 output is
// fully specified by the standard; the distribution transforms below are our
// own so results are bit-identical across platforms and toolchains
// (std::uniform_real_distribution et al. are implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, salts...). Streams derived with distinct
  // salts are decorrelated, so per-sequence / per-purpose generation can run
  // in any order (or in parallel) and still agree with the serial run.
  static Rng stream(uint64_t seed, std::initializer_list<uint64_t> salts) {
    uint64_t st = seed;
    (void)splitmix64(st);
    for (uint64_t s : salts) {
      st ^= 0x9e3779b97f4a7c15ULL + s;
      (void)splitmix64(st);
    }
    return Rng(splitmix64(st));
  }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi). Requires lo < hi.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform() * static_cast<double>(hi - lo));
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Exponential with the given mean. mean <= 0 yields +inf (no event).
  double exponential(double mean) {
    if (mean <= 0.0) return std::numeric_limits<double>::infinity();
    double u = 1.0 - uniform();
    return -mean * std::log(u);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pqmotion
