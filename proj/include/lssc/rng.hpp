// Deterministic random number generation.
//
// All randomness in the library flows through Rng: a std::mt19937_64 core
// (bit-exact across platforms per the C++ standard) with explicitly coded
// uniform and Box-Muller normal transforms, so draws do not depend on the
// standard library's unspecified distribution implementations. Independent
// streams are derived from a master seed with a splitmix64 mix, which is
// how replication harnesses hand one substream to each replication.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "lssc/base.hpp"

namespace lssc {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Substream `idx` of master seed `master`; distinct (master, idx) pairs
  // give statistically independent streams.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t idx) {
    return detail::splitmix64(detail::splitmix64(master) ^ (idx + 1));
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Note the second parameter is a VARIANCE, matching the simulation
  // settings' N(mu, sigma^2) notation.
  double normal(double mean, double variance) {
    return mean + std::sqrt(variance) * normal();
  }

  Matrix gaussian_matrix(int rows, int cols, double mean, double variance) {
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = normal(mean, variance);
    return m;
  }

  Matrix uniform_matrix(int rows, int cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = uniform(lo, hi);
    return m;
  }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace lssc
