#include "redspace/ppls.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <nlohmann/json.hpp>

namespace redspace {

namespace {

void check_model(const PplsModel& m) {
  if (m.W.rows() != m.sigma_s.size() || m.Q.rows() != m.sigma_y.size() ||
      m.W.cols() != m.Q.cols())
    throw std::invalid_argument("PplsModel: inconsistent dimensions");
  if ((m.sigma_s.array() <= 0.0).any() || (m.sigma_y.array() <= 0.0).any())
    throw std::invalid_argument("PplsModel: noise diagonals must be positive");
}

Matrix stacked_loadings(const PplsModel& m) {
  Matrix B(m.output_dim() + m.design_dim(), m.latent_dim());
  B.topRows(m.output_dim()) = m.Q;
  B.bottomRows(m.design_dim()) = m.W;
  return B;
}

/// Lower Cholesky factor of the joint covariance; throws on numerical
/// singularity (degenerate noise parameters).
Eigen::LLT<Matrix> factor_joint(const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("ppls: joint covariance is numerically singular");
  return llt;
}

double log_det_from_llt(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// Orthonormalise A's columns through the Cholesky factor of the Gram matrix
/// A^T A, escalating diagonal jitter when the factorisation fails (always
/// required for Q when d_z > d_y).
Matrix cholesky_orthonormalize(const Matrix& A) {
  Matrix G = A.transpose() * A;
  double scale = std::max(G.trace() / static_cast<double>(G.rows()), 1e-300);
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 7; ++attempt) {
    Matrix Gj = G;
    if (attempt > 0) {
      jitter = scale * std::pow(10.0, -10 + (attempt - 1));
      Gj.diagonal().array() += jitter;
    }
    Eigen::LLT<Matrix> llt(Gj);
    if (llt.info() == Eigen::Success) {
      // G = R^T R with R upper triangular; A R^{-1} has orthonormal columns.
      Matrix R = llt.matrixU();
      return R.transpose()
          .triangularView<Eigen::Lower>()
          .solve(A.transpose())
          .transpose();
    }
    if (attempt > 0 && jitter >= scale * 1e-4) break;
  }
  throw std::runtime_error(
      "ppls: rank-deficient latent statistics in M-step (reduce d_z)");
}

}  // namespace

Matrix marginal_covariance(const PplsModel& model) {
  check_model(model);
  const Index dy = model.output_dim();
  const Index ds = model.design_dim();
  Matrix cov(dy + ds, dy + ds);
  cov.topLeftCorner(dy, dy) = model.Q * model.Q.transpose();
  cov.topLeftCorner(dy, dy).diagonal() += model.sigma_y;
  cov.topRightCorner(dy, ds) = model.Q * model.W.transpose();
  cov.bottomLeftCorner(ds, dy) = cov.topRightCorner(dy, ds).transpose();
  cov.bottomRightCorner(ds, ds) = model.W * model.W.transpose();
  cov.bottomRightCorner(ds, ds).diagonal() += model.sigma_s;
  return cov;
}

LatentPosterior latent_posterior(const PplsModel& model, const Vector& y, const Vector& s) {
  if (y.size() != model.output_dim() || s.size() != model.design_dim())
    throw std::invalid_argument("latent_posterior: dimension mismatch");
  Matrix B = stacked_loadings(model);
  Eigen::LLT<Matrix> llt = factor_joint(marginal_covariance(model));
  Matrix cov_inv_B = llt.solve(B);
  Vector d(y.size() + s.size());
  d << y, s;
  LatentPosterior post;
  post.mean = cov_inv_B.transpose() * d;
  post.cov = Matrix::Identity(model.latent_dim(), model.latent_dim()) -
             B.transpose() * cov_inv_B;
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

BatchPosterior latent_posterior_batch(const PplsModel& model, const Matrix& Y_norm,
                                      const Matrix& S_norm) {
  if (Y_norm.rows() != S_norm.rows())
    throw std::invalid_argument("latent_posterior_batch: row counts differ");
  Matrix B = stacked_loadings(model);
  Eigen::LLT<Matrix> llt = factor_joint(marginal_covariance(model));
  Matrix cov_inv_B = llt.solve(B);
  Matrix D(Y_norm.rows(), Y_norm.cols() + S_norm.cols());
  D << Y_norm, S_norm;
  BatchPosterior post;
  post.means = D * cov_inv_B;
  post.cov = Matrix::Identity(model.latent_dim(), model.latent_dim()) -
             B.transpose() * cov_inv_B;
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

double elbo(const PplsModel& model, const Dataset& data,
            const std::vector<LatentPosterior>& q) {
  check_model(model);
  const Index n = data.n();
  if (static_cast<Index>(q.size()) != n)
    throw std::invalid_argument("elbo: need one trial density per row");
  const Index dz = model.latent_dim();
  const Index ds = model.design_dim();
  const Index dy = model.output_dim();

  Matrix S = data.normalized_designs();
  Matrix Y = data.normalized_observations();
  const Vector inv_sig_s = model.sigma_s.cwiseInverse();
  const Vector inv_sig_y = model.sigma_y.cwiseInverse();
  const double log_det_s = model.sigma_s.array().log().sum();
  const double log_det_y = model.sigma_y.array().log().sum();
  const double log2pi = std::log(2.0 * M_PI);

  // W^T Sigma_s^{-1} W and Q^T Sigma_y^{-1} Q are shared across rows.
  Matrix WtSiW = model.W.transpose() * inv_sig_s.asDiagonal() * model.W;
  Matrix QtSiQ = model.Q.transpose() * inv_sig_y.asDiagonal() * model.Q;

  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const LatentPosterior& qi = q[static_cast<size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Matrix> eig(qi.cov);
    if ((eig.eigenvalues().array() < -1e-10).any())
      throw std::invalid_argument("elbo: trial covariance is not PSD");
    Matrix Ezz = qi.cov + qi.mean * qi.mean.transpose();

    Vector s = S.row(i).transpose();
    Vector y = Y.row(i).transpose();
    double lik =
        -0.5 * (static_cast<double>(ds) * log2pi + log_det_s +
                s.dot(inv_sig_s.cwiseProduct(s)) -
                2.0 * qi.mean.dot(model.W.transpose() * inv_sig_s.cwiseProduct(s)) +
                (Ezz.cwiseProduct(WtSiW)).sum() + static_cast<double>(dy) * log2pi +
                log_det_y + y.dot(inv_sig_y.cwiseProduct(y)) -
                2.0 * qi.mean.dot(model.Q.transpose() * inv_sig_y.cwiseProduct(y)) +
                (Ezz.cwiseProduct(QtSiQ)).sum());

    double prior = -0.5 * (static_cast<double>(dz) * log2pi + Ezz.trace());
    // Entropy of q; clamp eigenvalues away from zero for the log.
    double log_det_q = eig.eigenvalues().array().max(1e-300).log().sum();
    double entropy = 0.5 * (static_cast<double>(dz) * (log2pi + 1.0) + log_det_q);
    total += lik + prior + entropy;
  }
  return total;
}

double log_marginal_likelihood(const PplsModel& model, const Dataset& data) {
  check_model(model);
  Matrix S = data.normalized_designs();
  Matrix Y = data.normalized_observations();
  Matrix D(S.rows(), Y.cols() + S.cols());
  D << Y, S;
  Eigen::LLT<Matrix> llt = factor_joint(marginal_covariance(model));
  double quad = 0.0;
  for (Index i = 0; i < D.rows(); ++i) {
    Vector d = D.row(i).transpose();
    quad += d.dot(llt.solve(d));
  }
  const double log2pi = std::log(2.0 * M_PI);
  return -0.5 * (static_cast<double>(D.rows() * D.cols()) * log2pi +
                 static_cast<double>(D.rows()) * log_det_from_llt(llt) + quad);
}

namespace {

/// Orthonormal basis completion used by the EM cold starts: leading columns
/// of `lead_cols`, the rest filled from the caller's stream.
Matrix completed_basis(const Matrix& lead_cols, Index rows, Index cols, Rng& rng) {
  Index lead = std::min(cols, lead_cols.cols());
  Matrix G(rows, cols);
  G.leftCols(lead) = lead_cols.leftCols(lead);
  if (cols > lead) G.rightCols(cols - lead) = rng.normal_matrix(rows, cols - lead);
  Eigen::HouseholderQR<Matrix> qr(G);
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

PplsModel cold_start_model(const Dataset& data, Index d_z, const Matrix& lead_cols,
                           Rng& rng) {
  const Index ds = data.design_dim();
  const Index dy = data.output_dim();
  Matrix S0 = data.normalized_designs();
  Matrix Y0 = data.normalized_observations();
  PplsModel model;
  model.W = completed_basis(lead_cols, ds, d_z, rng);
  Matrix GQ = Y0.transpose() * (S0 * model.W);
  if (dy >= d_z) {
    Eigen::HouseholderQR<Matrix> qr_q(GQ);
    model.Q = qr_q.householderQ() * Matrix::Identity(dy, d_z);
  } else {
    // Orthonormal columns are impossible when d_z > d_y; normalise only.
    model.Q = GQ;
    for (Index j = 0; j < d_z; ++j) {
      double norm = model.Q.col(j).norm();
      if (norm > 1e-12) model.Q.col(j) /= norm;
      else model.Q.col(j).setConstant(1.0 / std::sqrt(static_cast<double>(dy)));
    }
  }
  model.sigma_s = Vector::Ones(ds);
  model.sigma_y = Vector::Ones(dy);
  return model;
}

void run_em_sweeps(PplsModel& model, const Dataset& data, Index n_t,
                   const EmOptions& options, EmFitInfo* info) {
  const Index n = data.n();
  Matrix S = data.normalized_designs();
  Matrix Y = data.normalized_observations();
  Vector s_sq = S.array().square().colwise().sum();
  Vector y_sq = Y.array().square().colwise().sum();

  if (info != nullptr) {
    info->iterations = 0;
    info->elbo_trace.clear();
  }
  double prev_elbo = -std::numeric_limits<double>::infinity();

  // Generalized M-step for one side (inputs or outputs). The Cholesky update
  // of the aggregated statistics is the primary proposal, but it targets the
  // unweighted trace objective and can lose to the incumbent loadings once
  // the per-coordinate noise becomes anisotropic. Additional candidates (a
  // noise-weighted polar factor and backtracked interpolations) are scored
  // under the expected complete-data log-likelihood with their own optimal
  // floored noise; keeping the incumbent when nothing improves makes the
  // exact-posterior ELBO non-decreasing.
  auto update_side = [&](Matrix& L, Vector& sigma, const Matrix& A, const Vector& sq,
                         const Matrix& Mzz) {
    auto noise_for = [&](const Matrix& cand) {
      Vector sig = (sq - 2.0 * (cand.cwiseProduct(A)).rowwise().sum() +
                    (cand * Mzz).cwiseProduct(cand).rowwise().sum()) /
                   static_cast<double>(n);
      return Vector(sig.cwiseMax(options.variance_floor));
    };
    auto objective = [&](const Matrix& cand, const Vector& sig) {
      Vector inv = sig.cwiseInverse();
      double quad = sq.dot(inv);
      double cross = (cand.cwiseProduct(A)).rowwise().sum().dot(inv);
      double prior = (cand * Mzz).cwiseProduct(cand).rowwise().sum().dot(inv);
      return -0.5 * (static_cast<double>(n) * sig.array().log().sum() + quad -
                     2.0 * cross + prior);
    };

    // The likelihood is flat under joint rotations of the loadings, so the
    // within-subspace phase carries no evidence; proposals must clear a small
    // margin to be taken, which keeps the fit at the phase it was initialised
    // at instead of drifting along the flat manifold.
    constexpr double kAcceptSlack = 4e-9;

    Vector incumbent_sigma = noise_for(L);
    double incumbent = objective(L, incumbent_sigma);

    // Published update first; alternatives only when it fails to improve.
    Matrix primary = cholesky_orthonormalize(A);
    Vector primary_sigma = noise_for(primary);
    if (objective(primary, primary_sigma) > incumbent + kAcceptSlack) {
      L = std::move(primary);
      sigma = std::move(primary_sigma);
      return;
    }

    // Backtracked ascent on the noise-weighted objective over the Stiefel
    // manifold (polar retraction): escapes any non-stationary point while
    // preserving monotonicity.
    auto polar = [](const Matrix& M) {
      Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
      return Matrix(svd.matrixU() * svd.matrixV().transpose());
    };
    Matrix grad = sigma.cwiseInverse().asDiagonal() * (A - L * Mzz);
    double gnorm = grad.norm();
    if (gnorm > 1e-300) {
      double step = 1.0 / gnorm;
      for (int bt = 0; bt < 44; ++bt, step *= 0.5) {
        Matrix cand = polar(L + step * grad);
        Vector sig = noise_for(cand);
        if (objective(cand, sig) > incumbent + kAcceptSlack) {
          L = std::move(cand);
          sigma = std::move(sig);
          return;
        }
      }
    }
    sigma = std::move(incumbent_sigma);
  };

  for (Index t = 0; t < n_t; ++t) {
    // E-step: shared posterior covariance plus per-row means.
    BatchPosterior post = latent_posterior_batch(model, Y, S);
    double current = log_marginal_likelihood(model, data);
    if (info != nullptr) info->elbo_trace.push_back(current);

    Matrix A_s = S.transpose() * post.means;  // sum_i s_i E(z_i)^T
    Matrix A_y = Y.transpose() * post.means;
    Matrix Mzz = static_cast<double>(n) * post.cov +
                 post.means.transpose() * post.means;  // sum_i E(z_i z_i^T)

    update_side(model.W, model.sigma_s, A_s, s_sq, Mzz);
    update_side(model.Q, model.sigma_y, A_y, y_sq, Mzz);

    if (info != nullptr) info->iterations = t + 1;
    if (current - prev_elbo < options.elbo_tol && t > 0) break;
    prev_elbo = current;
  }
}

}  // namespace

PplsModel em_fit(const Dataset& data, Index d_z, Index n_t,
                 std::optional<PplsModel> init, const EmOptions& options,
                 EmFitInfo* info) {
  const Index ds = data.design_dim();
  const Index dy = data.output_dim();
  if (d_z < 1 || d_z > ds)
    throw std::invalid_argument("em_fit: require 1 <= d_z <= d_s");
  if (n_t < 0) throw std::invalid_argument("em_fit: n_t must be non-negative");

  Matrix S = data.normalized_designs();
  Matrix Y = data.normalized_observations();

  PplsModel model;
  if (init.has_value()) {
    model = std::move(*init);
    check_model(model);
    if (model.design_dim() != ds || model.output_dim() != dy ||
        model.latent_dim() != d_z)
      throw std::invalid_argument("em_fit: init model dimensions do not match");
    run_em_sweeps(model, data, n_t, options, info);
  } else {
    // Cold start: one covariance-aligned init (leading singular directions of
    // S^T Y) plus seeded random restarts; the best final evidence wins.
    Eigen::JacobiSVD<Matrix> svd(S.transpose() * Y, Eigen::ComputeThinU);
    double best = -std::numeric_limits<double>::infinity();
    EmFitInfo best_info;
    for (int r = 0; r <= std::max(0, options.cold_restarts); ++r) {
      Rng rng(derive_seed(options.seed, seed_key::em_init, static_cast<uint64_t>(r)));
      Matrix lead = r == 0 ? Matrix(svd.matrixU()) : rng.normal_matrix(ds, d_z);
      PplsModel candidate = cold_start_model(data, d_z, lead, rng);
      EmFitInfo candidate_info;
      run_em_sweeps(candidate, data, n_t, options, &candidate_info);
      double evidence = log_marginal_likelihood(candidate, data);
      if (evidence > best) {
        best = evidence;
        model = std::move(candidate);
        best_info = std::move(candidate_info);
      }
    }
    if (info != nullptr) *info = std::move(best_info);
  }

  if (n_t > 0) {
    // The likelihood only constrains W and Q through W W^T, Q Q^T and W Q^T,
    // so the within-subspace rotation is a free coordinate choice. Report the
    // canonical representative aligned (by orthogonal Procrustes) with the
    // leading singular directions of the input-output cross covariance; this
    // reparameterises the model without changing its distribution.
    Eigen::JacobiSVD<Matrix> svd(S.transpose() * Y, Eigen::ComputeThinU);
    Index lead = std::min(d_z, svd.matrixU().cols());
    Matrix reference(ds, d_z);
    reference.leftCols(lead) = svd.matrixU().leftCols(lead);
    if (d_z > lead) reference.rightCols(d_z - lead) = model.W.rightCols(d_z - lead);
    Eigen::JacobiSVD<Matrix> procrustes(model.W.transpose() * reference,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix rotation = procrustes.matrixU() * procrustes.matrixV().transpose();
    model.W = model.W * rotation;
    model.Q = model.Q * rotation;
  }

  if (info != nullptr) info->final_elbo = log_marginal_likelihood(model, data);
  return model;
}

DiagonalGaussian conditional_design_density(const PplsModel& model, const Vector& z_bar) {
  check_model(model);
  if (z_bar.size() != model.latent_dim())
    throw std::invalid_argument("conditional_design_density: latent dimension mismatch");
  return DiagonalGaussian{model.W * z_bar, model.sigma_s};
}

std::string ppls_to_json(const PplsModel& model, const EmFitInfo* info) {
  nlohmann::json j;
  j["d_s"] = model.design_dim();
  j["d_y"] = model.output_dim();
  j["d_z"] = model.latent_dim();
  auto row_major = [](const Matrix& M) {
    std::vector<double> v;
    v.reserve(static_cast<size_t>(M.size()));
    for (Index i = 0; i < M.rows(); ++i)
      for (Index jx = 0; jx < M.cols(); ++jx) v.push_back(M(i, jx));
    return v;
  };
  j["W"] = row_major(model.W);
  j["Q"] = row_major(model.Q);
  j["sigma_s"] = std::vector<double>(model.sigma_s.begin(), model.sigma_s.end());
  j["sigma_y"] = std::vector<double>(model.sigma_y.begin(), model.sigma_y.end());
  if (info != nullptr) {
    j["fit"] = {{"iterations", info->iterations}, {"final_elbo", info->final_elbo}};
  }
  return j.dump();
}

PplsModel ppls_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const Index ds = j.at("d_s").get<Index>();
  const Index dy = j.at("d_y").get<Index>();
  const Index dz = j.at("d_z").get<Index>();
  auto fill = [](Matrix& M, const std::vector<double>& v) {
    if (static_cast<Index>(v.size()) != M.size())
      throw std::invalid_argument("ppls_from_json: matrix size mismatch");
    size_t k = 0;
    for (Index i = 0; i < M.rows(); ++i)
      for (Index jx = 0; jx < M.cols(); ++jx) M(i, jx) = v[k++];
  };
  PplsModel model;
  model.W.resize(ds, dz);
  model.Q.resize(dy, dz);
  fill(model.W, j.at("W").get<std::vector<double>>());
  fill(model.Q, j.at("Q").get<std::vector<double>>());
  auto ss = j.at("sigma_s").get<std::vector<double>>();
  auto sy = j.at("sigma_y").get<std::vector<double>>();
  model.sigma_s = Eigen::Map<const Vector>(ss.data(), static_cast<Index>(ss.size()));
  model.sigma_y = Eigen::Map<const Vector>(sy.data(), static_cast<Index>(sy.size()));
  check_model(model);
  return model;
}

}  // namespace redspace
