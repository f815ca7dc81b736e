#include "redspace/doe.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace redspace {

Matrix latin_hypercube(Index n, const DesignDomain& domain, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("latin_hypercube: n must be >= 1");
  const Index d = domain.dim();
  Rng rng(seed);
  Matrix X(n, d);
  std::vector<Index> strata(n);
  for (Index j = 0; j < d; ++j) {
    std::iota(strata.begin(), strata.end(), Index{0});
    // Fisher-Yates with the caller's stream.
    for (Index i = n - 1; i > 0; --i) {
      Index k = rng.uniform_index(i + 1);
      std::swap(strata[i], strata[k]);
    }
    for (Index i = 0; i < n; ++i) {
      double u = (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(n);
      X(i, j) = domain.lower[j] + u * (domain.upper[j] - domain.lower[j]);
    }
  }
  return X;
}

Index plackett_burman_runs(Index d) {
  return 4 * (d / 4 + 1);
}

namespace {

// Standard Plackett-Burman generator rows (first row; remaining rows are its
// cyclic shifts plus a final all-minus row).
const std::vector<int>* generator_row(Index runs) {
  static const std::vector<int> g8 = {+1, +1, +1, -1, +1, -1, -1};
  static const std::vector<int> g12 = {+1, +1, -1, +1, +1, +1, -1, -1, -1, +1, -1};
  static const std::vector<int> g16 = {+1, +1, +1, +1, -1, +1, -1, +1,
                                       +1, -1, -1, +1, -1, -1, -1};
  static const std::vector<int> g20 = {+1, +1, -1, -1, +1, +1, +1, +1, -1, +1,
                                       -1, +1, -1, -1, -1, -1, +1, +1, -1};
  static const std::vector<int> g24 = {+1, +1, +1, +1, +1, -1, +1, -1, +1, +1, -1, -1,
                                       +1, +1, -1, -1, +1, -1, +1, -1, -1, -1, -1};
  switch (runs) {
    case 8: return &g8;
    case 12: return &g12;
    case 16: return &g16;
    case 20: return &g20;
    case 24: return &g24;
    default: return nullptr;
  }
}

}  // namespace

Matrix plackett_burman(const DesignDomain& domain) {
  const Index d = domain.dim();
  if (d < 2) throw std::invalid_argument("plackett_burman: need d_s >= 2");
  const Index runs = plackett_burman_runs(d);
  const std::vector<int>* gen = generator_row(runs);
  if (gen == nullptr)
    throw std::invalid_argument("plackett_burman: no generator row for n_pb = " +
                                std::to_string(runs) + " (d_s = " + std::to_string(d) + ")");
  Matrix X(runs, d);
  const Index width = runs - 1;
  for (Index i = 0; i < runs - 1; ++i) {
    for (Index j = 0; j < d; ++j) {
      int level = (*gen)[static_cast<size_t>((j + i) % width)];
      X(i, j) = level > 0 ? domain.upper[j] : domain.lower[j];
    }
  }
  for (Index j = 0; j < d; ++j) X(runs - 1, j) = domain.lower[j];
  return X;
}

}  // namespace redspace
