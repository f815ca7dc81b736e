#pragma once

#include "redspace/core.hpp"
#include "redspace/dataset.hpp"

#include <optional>
#include <string>
#include <vector>

namespace redspace {

/// Probabilistic PLS generative model
///   s = W z + eps_s,  eps_s ~ N(0, Sigma_s)
///   y = Q z + eps_y,  eps_y ~ N(0, Sigma_y)
/// with z ~ N(0, I), orthogonal loadings and diagonal noise covariances
/// (stored as their diagonals).
struct PplsModel {
  Matrix W;        // d_s x d_z
  Matrix Q;        // d_y x d_z
  Vector sigma_s;  // d_s, diagonal of Sigma_s, strictly positive
  Vector sigma_y;  // d_y, diagonal of Sigma_y, strictly positive

  Index design_dim() const { return W.rows(); }
  Index output_dim() const { return Q.rows(); }
  Index latent_dim() const { return W.cols(); }
};

/// Gaussian posterior p(z | y, s). The covariance is shared by every
/// conditioning point; only the mean depends on (y, s).
struct LatentPosterior {
  Vector mean;
  Matrix cov;
};

struct EmFitInfo {
  Index iterations = 0;
  double final_elbo = 0.0;
  std::vector<double> elbo_trace;
};

/// Joint covariance of (y, s): [[QQ^T + Sigma_y, QW^T], [WQ^T, WW^T + Sigma_s]].
Matrix marginal_covariance(const PplsModel& model);

/// Exact latent posterior for one normalised observation pair.
LatentPosterior latent_posterior(const PplsModel& model, const Vector& y, const Vector& s);

/// Posterior means for every row of normalised (Y, S) plus the shared
/// covariance; equivalent to calling latent_posterior row by row.
struct BatchPosterior {
  Matrix means;  // n x d_z
  Matrix cov;    // d_z x d_z
};
BatchPosterior latent_posterior_batch(const PplsModel& model, const Matrix& Y_norm,
                                      const Matrix& S_norm);

/// Evidence lower bound sum_i E_q[ln p(y_i, s_i | z_i)] + E_q[ln p(z_i)]
/// - E_q[ln q(z_i)] for one trial density per training row.
double elbo(const PplsModel& model, const Dataset& data,
            const std::vector<LatentPosterior>& q);

/// Exact log marginal likelihood sum_i ln N([y_i; s_i]; 0, Sigma_ys), i.e.
/// the ELBO at the exact posterior.
double log_marginal_likelihood(const PplsModel& model, const Dataset& data);

struct EmOptions {
  uint64_t seed = 0;
  double elbo_tol = 1e-10;     // early exit when the per-sweep gain drops below
  double variance_floor = 1e-8;
  // Cold starts only: one covariance-aligned init plus this many seeded
  // random inits, keeping the best final evidence.
  int cold_restarts = 2;
};

/// EM training: exact-posterior E-step, Cholesky-orthogonalised M-step.
/// Runs n_t sweeps (early exit on stalled ELBO); with n_t = 0 the init model
/// is returned unchanged.
PplsModel em_fit(const Dataset& data, Index d_z, Index n_t,
                 std::optional<PplsModel> init = std::nullopt,
                 const EmOptions& options = {}, EmFitInfo* info = nullptr);

/// Diagonal Gaussian p(s | z_bar) = N(W z_bar, Sigma_s).
struct DiagonalGaussian {
  Vector mean;
  Vector variance;

  Vector sample(Rng& rng) const {
    Vector x(mean.size());
    for (Index i = 0; i < x.size(); ++i)
      x[i] = mean[i] + std::sqrt(variance[i]) * rng.normal();
    return x;
  }
};

DiagonalGaussian conditional_design_density(const PplsModel& model, const Vector& z_bar);

/// JSON round-trip: dimensions, row-major W and Q, noise diagonals, and fit
/// metadata when provided.
std::string ppls_to_json(const PplsModel& model, const EmFitInfo* info = nullptr);
PplsModel ppls_from_json(const std::string& text);

}  // namespace redspace
