#pragma once

#include "redspace/core.hpp"

namespace redspace {

/// Box-bounded design space.
struct DesignDomain {
  Vector lower;
  Vector upper;

  DesignDomain(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.size() < 1)
      throw std::invalid_argument("DesignDomain: bounds must be non-empty and equal-sized");
    for (Index i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i]))
        throw std::invalid_argument("DesignDomain: lower[i] < upper[i] required");
  }

  static DesignDomain unit_cube(Index d) {
    return DesignDomain(Vector::Zero(d), Vector::Ones(d));
  }

  Index dim() const { return lower.size(); }

  bool contains(const Vector& s) const {
    if (s.size() != dim()) return false;
    return (s.array() >= lower.array()).all() && (s.array() <= upper.array()).all();
  }

  Vector clip(const Vector& s) const {
    return s.cwiseMax(lower).cwiseMin(upper);
  }
};

/// Minimum bounding box of the feasible latent set.
struct LatentBox {
  Vector lower;
  Vector upper;

  Index dim() const { return lower.size(); }

  bool contains(const Vector& z) const {
    return (z.array() >= lower.array()).all() && (z.array() <= upper.array()).all();
  }
};

inline LatentBox as_box(const DesignDomain& d) { return LatentBox{d.lower, d.upper}; }

}  // namespace redspace
