#include "redspace/reduction.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace redspace {

void fix_column_signs(Matrix& B) {
  for (Index j = 0; j < B.cols(); ++j) {
    Index imax = 0;
    B.col(j).cwiseAbs().maxCoeff(&imax);
    if (B(imax, j) < 0.0) B.col(j) = -B.col(j);
  }
}

namespace {

constexpr double kNipalsTol = 1e-10;
constexpr Index kNipalsMaxIters = 500;

void check_component_count(Index d_z, Index d_s, Index n) {
  if (d_z < 1 || d_z > std::min(d_s, n - 1))
    throw std::invalid_argument("reduction: require 1 <= d_z <= min(d_s, n-1)");
}

}  // namespace

PlsBasis nipals_fit(const Dataset& data, Index d_z) {
  const Index n = data.n();
  const Index d_s = data.design_dim();
  const Index d_y = data.output_dim();
  check_component_count(d_z, d_s, n);

  Matrix S = data.normalized_designs();
  Matrix Y = data.normalized_observations();
  if ((S.transpose() * Y).cwiseAbs().maxCoeff() < 1e-14)
    throw std::runtime_error("nipals_fit: input-output covariance is identically zero");

  PlsBasis basis;
  basis.W.resize(d_s, d_z);
  basis.Q.resize(d_y, d_z);
  basis.scores_z.resize(n, d_z);
  basis.scores_v.resize(n, d_z);

  for (Index a = 0; a < d_z; ++a) {
    // Seed the inner power iteration with the strongest residual output.
    Index j0 = 0;
    Y.colwise().squaredNorm().maxCoeff(&j0);
    Vector u = Y.col(j0);
    Vector w = Vector::Zero(d_s);
    Vector q(d_y), z(n);
    for (Index it = 0; it < kNipalsMaxIters; ++it) {
      Vector w_new = S.transpose() * u;
      double wn = w_new.norm();
      if (wn < 1e-300)
        throw std::runtime_error("nipals_fit: residual covariance vanished");
      w_new /= wn;
      z = S * w_new;
      q = Y.transpose() * z;
      double qn = q.norm();
      if (qn < 1e-300)
        throw std::runtime_error("nipals_fit: residual covariance vanished");
      q /= qn;
      u = Y * q;
      double delta = (w_new - w).norm();
      w = w_new;
      if (delta < kNipalsTol) break;
    }
    basis.W.col(a) = w;
    basis.Q.col(a) = q;
    basis.scores_z.col(a) = z;
    basis.scores_v.col(a) = u;

    double zz = z.squaredNorm();
    if (zz > 0.0) {
      S.noalias() -= z * (S.transpose() * z / zz).transpose();
      Y.noalias() -= z * (Y.transpose() * z / zz).transpose();
    }
  }

  // Orthonormalise the output-side directions up to min(d_z, d_y); beyond
  // that rank the columns stay unit-norm only.
  const Index orth = std::min(d_z, d_y);
  for (Index j = 0; j < d_z; ++j) {
    Vector q = basis.Q.col(j);
    if (j < orth) {
      for (Index i = 0; i < j; ++i) q -= basis.Q.col(i).dot(q) * basis.Q.col(i);
    }
    double qn = q.norm();
    if (qn > 1e-12) basis.Q.col(j) = q / qn;
  }

  fix_column_signs(basis.W);
  fix_column_signs(basis.Q);
  return basis;
}

Vector pls_reconstruct(const Vector& z, const PlsBasis& basis) {
  if (z.size() != basis.W.cols())
    throw std::invalid_argument("pls_reconstruct: latent dimension mismatch");
  // (W^+)^T z via SVD pseudo-inverse; reconstruction error term taken as zero.
  Eigen::JacobiSVD<Matrix> svd(basis.W, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  double cutoff = sv.size() > 0 ? sv[0] * 1e-12 : 0.0;
  Vector inv_sv(sv.size());
  for (Index i = 0; i < sv.size(); ++i) inv_sv[i] = sv[i] > cutoff ? 1.0 / sv[i] : 0.0;
  // W^+ = V diag(1/s) U^T, so (W^+)^T = U diag(1/s) V^T.
  return svd.matrixU() * inv_sv.asDiagonal() * svd.matrixV().transpose() * z;
}

Matrix pca_fit(const Dataset& data, Index d_z) {
  const Index n = data.n();
  const Index d_s = data.design_dim();
  check_component_count(d_z, d_s, n);

  Matrix S = data.normalized_designs();
  Matrix C = S.transpose() * S / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(C);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("pca_fit: eigendecomposition failed");

  Matrix W(d_s, d_z);
  for (Index j = 0; j < d_z; ++j) W.col(j) = eig.eigenvectors().col(d_s - 1 - j);
  fix_column_signs(W);
  return W;
}

}  // namespace redspace
