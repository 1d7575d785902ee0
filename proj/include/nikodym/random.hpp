#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "nikodym/vec.hpp"

namespace nikodym {

// splitmix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b + 0x632be59bd9b4e019ULL));
}

/// Seeded random stream. Streams with distinct (seed, stream) pairs are independent.
class Rng {
public:
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    eng_.seed(seq);
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal() { return normal_(eng_); }

  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(eng_);
  }

  std::mt19937_64& engine() { return eng_; }

private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline double unit_ball_volume(int k) {
  if (k == 0) return 1.0;
  return std::pow(std::numbers::pi, 0.5 * k) / std::tgamma(0.5 * k + 1.0);
}

// Surface area of the unit sphere S^{n-1} in R^n.
inline double sphere_area(int n) { return n * unit_ball_volume(n); }

inline double shell_volume(int k, double r0, double r1) {
  if (k == 0) return (r0 <= 0.0 && r1 >= 0.0) ? 1.0 : 0.0;
  return unit_ball_volume(k) * (std::pow(r1, k) - std::pow(r0, k));
}

inline Vec random_direction(int n, Rng& rng) {
  Vec v(n);
  double r2 = 0.0;
  do {
    for (int i = 0; i < n; ++i) v[i] = rng.normal();
    r2 = v.norm2();
  } while (r2 < 1e-300);
  return v / std::sqrt(r2);
}

// Uniform point in {r0 <= |y| <= r1} in R^k.
inline Vec uniform_in_shell(int k, double r0, double r1, Rng& rng) {
  if (k == 0) return Vec(0);
  const double a = std::pow(r0, k), b = std::pow(r1, k);
  const double r = std::pow(a + (b - a) * rng.uniform(), 1.0 / k);
  return random_direction(k, rng) * r;
}

inline Vec uniform_in_ball(int k, double radius, Rng& rng) {
  return uniform_in_shell(k, 0.0, radius, rng);
}

}  // namespace nikodym
