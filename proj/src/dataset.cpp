#include "redspace/dataset.hpp"

namespace redspace {

namespace {

void column_stats(const Matrix& X, Vector& mean, Vector& scale) {
  const Index n = X.rows();
  mean = X.colwise().mean();
  scale.resize(X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    double ss = (X.col(j).array() - mean[j]).square().sum();
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    scale[j] = sd > 0.0 ? sd : 1.0;
  }
}

}  // namespace

Dataset::Dataset(Matrix S, Matrix Y) : S_(std::move(S)), Y_(std::move(Y)) {
  if (S_.rows() != Y_.rows())
    throw std::invalid_argument("Dataset: S and Y row counts differ");
  if (S_.rows() < 2)
    throw std::invalid_argument("Dataset: need at least 2 rows");
  column_stats(S_, mean_s_, scale_s_);
  column_stats(Y_, mean_y_, scale_y_);
}

Matrix Dataset::normalized_designs() const {
  return (S_.rowwise() - mean_s_.transpose()).array().rowwise() /
         scale_s_.transpose().array();
}

Matrix Dataset::normalized_observations() const {
  return (Y_.rowwise() - mean_y_.transpose()).array().rowwise() /
         scale_y_.transpose().array();
}

Vector Dataset::normalize_design(const Vector& s) const {
  return (s - mean_s_).cwiseQuotient(scale_s_);
}

Vector Dataset::denormalize_design(const Vector& s_norm) const {
  return s_norm.cwiseProduct(scale_s_) + mean_s_;
}

Vector Dataset::normalize_observation(const Vector& y) const {
  return (y - mean_y_).cwiseQuotient(scale_y_);
}

Vector Dataset::denormalize_observation(const Vector& y_norm) const {
  return y_norm.cwiseProduct(scale_y_) + mean_y_;
}

Dataset normalize(Matrix S, Matrix Y) {
  return Dataset(std::move(S), std::move(Y));
}

}  // namespace redspace
