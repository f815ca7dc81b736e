#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace redspace {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

/// P(X > x) for X ~ N(0,1).
inline double normal_sf(double x) {
  return 0.5 * std::erfc(x * 0.7071067811865475244);
}

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Keyed substream seed: independent streams for (base, key, index) tuples,
/// so adding consumers never perturbs existing ones.
inline uint64_t derive_seed(uint64_t base, uint64_t key, uint64_t index = 0) {
  uint64_t s = base;
  uint64_t a = splitmix64(s);
  s ^= key * 0x9e3779b97f4a7c15ull;
  uint64_t b = splitmix64(s);
  s ^= index * 0xd1342543de82ef95ull;
  uint64_t c = splitmix64(s);
  return a ^ (b << 1) ^ c;
}

// Substream keys used across the library. Values are arbitrary but fixed:
// changing them changes every seeded result.
namespace seed_key {
inline constexpr uint64_t doe = 0x01;
inline constexpr uint64_t em_init = 0x02;
inline constexpr uint64_t gp_fit = 0x03;
inline constexpr uint64_t mc_draws = 0x04;
inline constexpr uint64_t acquisition = 0x05;
inline constexpr uint64_t design_sample = 0x06;
}  // namespace seed_key

/// Deterministic RNG with explicitly implemented transforms, so streams are
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double theta = 6.283185307179586477 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n).
  Index uniform_index(Index n) {
    return static_cast<Index>(uniform() * static_cast<double>(n));
  }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Matrix normal_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace redspace
