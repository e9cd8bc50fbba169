#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace xcos {

// Deterministic RNG wrapper. All draws go through explicit helpers instead of
// std:: distributions so that seeded runs reproduce bit-for-bit across
// standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, bound). bound must be > 0.
  uint64_t next_below(uint64_t bound) {
    // Rejection sampling on the top bits keeps the draw unbiased.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  int next_int(int lo, int hi) {  // inclusive range
    return lo + static_cast<int>(next_below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Uniform real in [0, 1) with 53-bit resolution.
  double next_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double next_real(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  bool next_bool() { return (engine_() & 1u) != 0; }

  // Standard normal via Box-Muller (one value per call; spare cached).
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = next_unit();
    } while (u1 <= 0.0);
    u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Derives an independent stream, e.g. one per identity or per image.
  Rng fork(uint64_t salt) {
    return Rng(engine_() ^ (salt * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace xcos
