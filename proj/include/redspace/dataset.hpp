#pragma once

#include "redspace/core.hpp"

namespace redspace {

/// Paired design/observation data with per-column normalisation statistics.
/// Raw matrices are kept; normalised views are computed on demand. Constant
/// columns get scale 1 so they normalise to zero.
class Dataset {
 public:
  Dataset(Matrix S, Matrix Y);

  Index n() const { return S_.rows(); }
  Index design_dim() const { return S_.cols(); }
  Index output_dim() const { return Y_.cols(); }

  const Matrix& designs() const { return S_; }
  const Matrix& observations() const { return Y_; }

  const Vector& mean_s() const { return mean_s_; }
  const Vector& scale_s() const { return scale_s_; }
  const Vector& mean_y() const { return mean_y_; }
  const Vector& scale_y() const { return scale_y_; }

  Matrix normalized_designs() const;
  Matrix normalized_observations() const;

  Vector normalize_design(const Vector& s) const;
  Vector denormalize_design(const Vector& s_norm) const;
  Vector normalize_observation(const Vector& y) const;
  Vector denormalize_observation(const Vector& y_norm) const;

 private:
  Matrix S_, Y_;
  Vector mean_s_, scale_s_, mean_y_, scale_y_;
};

/// Mean-centre and scale to unit sample standard deviation (n-1 denominator).
Dataset normalize(Matrix S, Matrix Y);

}  // namespace redspace
