#pragma once

#include "redspace/core.hpp"
#include "redspace/dataset.hpp"

namespace redspace {

/// Input/output subspace bases produced by NIPALS, with the per-component
/// score vectors retained as derived projections.
struct PlsBasis {
  Matrix W;         // d_s x d_z, orthonormal columns
  Matrix Q;         // d_y x d_z, orthonormal up to min(d_z, d_y) columns
  Matrix scores_z;  // n x d_z input-side scores
  Matrix scores_v;  // n x d_z output-side scores
};

/// NIPALS partial least squares on normalised data: extracts d_z components
/// maximising input-output covariance, one deflation step per component.
PlsBasis nipals_fit(const Dataset& data, Index d_z);

/// Low-rank reconstruction (W^+)^T z; equals W z when W has orthonormal
/// columns. Coordinates are in the units the basis was fitted in.
Vector pls_reconstruct(const Vector& z, const PlsBasis& basis);

/// Top d_z eigenvectors of the normalised input covariance, orthonormal and
/// sign-fixed.
Matrix pca_fit(const Dataset& data, Index d_z);

/// Flip each column so its largest-magnitude entry is positive.
void fix_column_signs(Matrix& B);

}  // namespace redspace
