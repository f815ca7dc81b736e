#pragma once

#include "redspace/core.hpp"

#include <optional>

namespace redspace {

enum class KernelConvention {
  // Squared-exponential with the lengthscale entering linearly in the
  // denominator, exp(-sum (z_i - z'_i)^2 / (2 l_i)); l_i acts as a squared
  // lengthscale.
  kLinearLengthscale,
  // Conventional exp(-sum (z_i - z'_i)^2 / (2 l_i^2)) form.
  kSquaredLengthscale,
};

struct KernelParams {
  double sigma_f = 1.0;
  Vector lengthscales;  // one per input dimension, strictly positive
};

double kernel(const Vector& z, const Vector& z_prime, const KernelParams& theta,
              KernelConvention convention = KernelConvention::kLinearLengthscale);

struct GaussianPrediction {
  Vector mean;
  Vector variance;                  // marginal, clamped at zero
  std::optional<Matrix> covariance; // full predictive covariance on request
};

/// Exact GP regression with a squared-exponential ARD kernel and cached
/// Cholesky factor of C_ZZ + sigma_y^2 I. Fitted models are immutable.
class GpModel {
 public:
  GpModel(Matrix Z, Vector y, KernelParams theta, double sigma_y,
          KernelConvention convention = KernelConvention::kLinearLengthscale);

  Index n() const { return Z_.rows(); }
  Index input_dim() const { return Z_.cols(); }
  const Matrix& inputs() const { return Z_; }
  const Vector& outputs() const { return y_; }
  const KernelParams& theta() const { return theta_; }
  double sigma_y() const { return sigma_y_; }
  KernelConvention convention() const { return convention_; }
  double jitter() const { return jitter_; }

  /// Lower-triangular factor L with L L^T = C_ZZ + (sigma_y^2 + jitter) I.
  const Matrix& chol_lower() const { return chol_lower_; }

  GaussianPrediction predict(const Matrix& Z_star, bool full_covariance = false) const;

  /// Allocation-light single-point predictive mean and marginal variance.
  void predict_one(const Vector& z_star, double& mean, double& variance) const;

  double log_marginal_likelihood() const;

  /// Gradient of the log marginal likelihood with respect to
  /// [log sigma_f, log l_1, ..., log l_d, log sigma_y].
  Vector log_marginal_gradient() const;

  /// Same hyperparameters, new training inputs (outputs unchanged).
  GpModel with_inputs(Matrix Z_new) const;

  /// Hyperparameters as a log-parameter vector and back.
  Vector log_params() const;

 private:
  Matrix Z_;
  Vector y_;
  KernelParams theta_;
  double sigma_y_;
  KernelConvention convention_;
  Matrix chol_lower_;
  Vector alpha_;  // (C_ZZ + sigma_y^2 I)^{-1} y
  Vector inv_denom_;  // per-dimension 1 / (2 l) or 1 / (2 l^2)
  double jitter_ = 0.0;

  Matrix cross_covariance(const Matrix& Z_star) const;
};

struct GpFitOptions {
  int restarts = 8;
  uint64_t seed = 0;
  KernelConvention convention = KernelConvention::kLinearLengthscale;
  std::optional<Vector> warm_start;  // log-parameter vector
  double noise_floor = 1e-6;
  int max_iterations = 100;
  double grad_tol = 1e-6;
  double log_bound = 10.0;  // log-parameters clipped to [-bound, bound]
};

struct GpFitResult {
  bool converged = true;  // false when every restart diverged
  double best_lml = 0.0;
};

/// Hyperparameter training by multi-start gradient ascent on the log marginal
/// likelihood in log-parameter space. Restart r draws its start from an
/// independent substream of `seed`, so adding restarts never perturbs
/// earlier ones.
GpModel gp_fit(const Matrix& Z, const Vector& y, const GpFitOptions& options = {},
               GpFitResult* result = nullptr);

}  // namespace redspace
