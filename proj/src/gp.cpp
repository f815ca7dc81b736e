#include "redspace/gp.hpp"

#include <Eigen/Cholesky>

namespace redspace {

namespace {

double scaled_sq_dist(const Vector& a, const Vector& b, const Vector& ell,
                      KernelConvention conv) {
  double acc = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    double d2 = (a[i] - b[i]) * (a[i] - b[i]);
    double denom = conv == KernelConvention::kLinearLengthscale
                       ? 2.0 * ell[i]
                       : 2.0 * ell[i] * ell[i];
    acc += d2 / denom;
  }
  return acc;
}

Matrix scale_columns(const Matrix& X, const Vector& ell, KernelConvention conv) {
  Matrix S = X;
  for (Index k = 0; k < X.cols(); ++k) {
    double denom = conv == KernelConvention::kLinearLengthscale
                       ? 2.0 * ell[k]
                       : 2.0 * ell[k] * ell[k];
    S.col(k) /= std::sqrt(denom);
  }
  return S;
}

Matrix gram(const Matrix& A, const Matrix& B, const KernelParams& theta,
            KernelConvention conv) {
  Matrix As = scale_columns(A, theta.lengthscales, conv);
  Matrix Bs = scale_columns(B, theta.lengthscales, conv);
  Vector a2 = As.rowwise().squaredNorm();
  Vector b2 = Bs.rowwise().squaredNorm();
  Matrix D = -2.0 * As * Bs.transpose();
  D.colwise() += a2;
  D.rowwise() += b2.transpose();
  const double sf2 = theta.sigma_f * theta.sigma_f;
  return sf2 * (-D.cwiseMax(0.0)).array().exp();
}

}  // namespace

double kernel(const Vector& z, const Vector& z_prime, const KernelParams& theta,
              KernelConvention convention) {
  if (z.size() != z_prime.size() || z.size() != theta.lengthscales.size())
    throw std::invalid_argument("kernel: dimension mismatch");
  return theta.sigma_f * theta.sigma_f *
         std::exp(-scaled_sq_dist(z, z_prime, theta.lengthscales, convention));
}

GpModel::GpModel(Matrix Z, Vector y, KernelParams theta, double sigma_y,
                 KernelConvention convention)
    : Z_(std::move(Z)),
      y_(std::move(y)),
      theta_(std::move(theta)),
      sigma_y_(std::max(sigma_y, 1e-6)),
      convention_(convention) {
  if (Z_.rows() != y_.size())
    throw std::invalid_argument("GpModel: input/output row counts differ");
  if (theta_.lengthscales.size() != Z_.cols())
    throw std::invalid_argument("GpModel: one lengthscale per input dimension required");
  if (theta_.sigma_f <= 0.0 || (theta_.lengthscales.array() <= 0.0).any())
    throw std::invalid_argument("GpModel: hyperparameters must be positive");

  inv_denom_.resize(Z_.cols());
  for (Index k = 0; k < Z_.cols(); ++k) {
    double l = theta_.lengthscales[k];
    inv_denom_[k] = convention_ == KernelConvention::kLinearLengthscale
                        ? 1.0 / (2.0 * l)
                        : 1.0 / (2.0 * l * l);
  }

  Matrix K = gram(Z_, Z_, theta_, convention_);
  K.diagonal().array() += sigma_y_ * sigma_y_;
  const double scale = std::max(K.trace() / static_cast<double>(K.rows()), 1e-300);
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 7; ++attempt) {
    Matrix Kj = K;
    if (attempt > 0) {
      jitter = scale * std::pow(10.0, -10 + (attempt - 1));
      Kj.diagonal().array() += jitter;
    }
    Eigen::LLT<Matrix> llt(Kj);
    if (llt.info() == Eigen::Success) {
      chol_lower_ = llt.matrixL();
      alpha_ = llt.solve(y_);
      jitter_ = attempt > 0 ? jitter : 0.0;
      return;
    }
  }
  throw std::runtime_error("GpModel: kernel matrix is not positive definite");
}

Matrix GpModel::cross_covariance(const Matrix& Z_star) const {
  return gram(Z_star, Z_, theta_, convention_);
}

GaussianPrediction GpModel::predict(const Matrix& Z_star, bool full_covariance) const {
  if (Z_star.cols() != Z_.cols())
    throw std::invalid_argument("predict: input dimension mismatch");
  Matrix Ks = cross_covariance(Z_star);  // n_* x n
  GaussianPrediction pred;
  pred.mean = Ks * alpha_;
  // v = L^{-1} K_s^T, so the predictive covariance is K_** - v^T v.
  Matrix v = chol_lower_.triangularView<Eigen::Lower>().solve(Ks.transpose());
  const double sf2 = theta_.sigma_f * theta_.sigma_f;
  pred.variance.resize(Z_star.rows());
  for (Index i = 0; i < Z_star.rows(); ++i)
    pred.variance[i] = std::max(sf2 - v.col(i).squaredNorm(), 0.0);
  if (full_covariance) {
    Matrix Kss = gram(Z_star, Z_star, theta_, convention_);
    pred.covariance = Kss - v.transpose() * v;
  }
  return pred;
}

void GpModel::predict_one(const Vector& z_star, double& mean, double& variance) const {
  const Index m = n();
  const Index d = input_dim();
  const double sf2 = theta_.sigma_f * theta_.sigma_f;
  Vector k(m);
  for (Index i = 0; i < m; ++i) {
    double acc = 0.0;
    for (Index kd = 0; kd < d; ++kd) {
      double diff = z_star[kd] - Z_(i, kd);
      acc += diff * diff * inv_denom_[kd];
    }
    k[i] = sf2 * std::exp(-acc);
  }
  mean = k.dot(alpha_);
  chol_lower_.triangularView<Eigen::Lower>().solveInPlace(k);
  variance = std::max(sf2 - k.squaredNorm(), 0.0);
}

double GpModel::log_marginal_likelihood() const {
  double log_det = 2.0 * chol_lower_.diagonal().array().log().sum();
  return -0.5 * y_.dot(alpha_) - 0.5 * log_det -
         0.5 * static_cast<double>(n()) * std::log(2.0 * M_PI);
}

Vector GpModel::log_marginal_gradient() const {
  const Index d = input_dim();
  const Index m = n();
  Matrix K_noise_free = gram(Z_, Z_, theta_, convention_);
  // A = alpha alpha^T - K^{-1}; grad_j = 0.5 tr(A dK/dtheta_j).
  Matrix Kinv = chol_lower_.triangularView<Eigen::Lower>().solve(Matrix::Identity(m, m));
  Kinv = chol_lower_.transpose().triangularView<Eigen::Upper>().solve(Kinv);
  Matrix A = alpha_ * alpha_.transpose() - Kinv;

  Vector grad(d + 2);
  // d/dlog sigma_f: 2 * C_ZZ.
  grad[0] = (A.cwiseProduct(K_noise_free)).sum();
  for (Index k = 0; k < d; ++k) {
    // dK/dlog l_k = C o D_k / (2 l_k) in the linear convention and
    // C o D_k / l_k^2 in the squared convention.
    Matrix Dk(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j) {
        double diff = Z_(i, k) - Z_(j, k);
        Dk(i, j) = diff * diff;
      }
    double denom = convention_ == KernelConvention::kLinearLengthscale
                       ? 2.0 * theta_.lengthscales[k]
                       : theta_.lengthscales[k] * theta_.lengthscales[k];
    Matrix dK = K_noise_free.cwiseProduct(Dk) / denom;
    grad[k + 1] = 0.5 * (A.cwiseProduct(dK)).sum();
  }
  // d/dlog sigma_y: 2 sigma_y^2 I.
  grad[d + 1] = sigma_y_ * sigma_y_ * A.trace();
  return grad;
}

GpModel GpModel::with_inputs(Matrix Z_new) const {
  return GpModel(std::move(Z_new), y_, theta_, sigma_y_, convention_);
}

Vector GpModel::log_params() const {
  Vector p(input_dim() + 2);
  p[0] = std::log(theta_.sigma_f);
  for (Index i = 0; i < input_dim(); ++i) p[i + 1] = std::log(theta_.lengthscales[i]);
  p[input_dim() + 1] = std::log(sigma_y_);
  return p;
}

namespace {

GpModel model_from_log_params(const Matrix& Z, const Vector& y, const Vector& p,
                              KernelConvention conv) {
  KernelParams theta;
  theta.sigma_f = std::exp(p[0]);
  theta.lengthscales = p.segment(1, Z.cols()).array().exp();
  return GpModel(Z, y, theta, std::exp(p[Z.cols() + 1]), conv);
}

struct AscentOutcome {
  Vector p;
  double lml;
  bool ok;
};

AscentOutcome ascend(const Matrix& Z, const Vector& y, Vector p,
                     const GpFitOptions& opt) {
  const double lo = -opt.log_bound;
  const double hi = opt.log_bound;
  const double log_noise_floor = std::log(opt.noise_floor);
  auto clamp = [&](Vector v) {
    for (Index i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], lo, hi);
    v[v.size() - 1] = std::max(v[v.size() - 1], log_noise_floor);
    return v;
  };

  p = clamp(p);
  double lml;
  Vector grad;
  try {
    GpModel m = model_from_log_params(Z, y, p, opt.convention);
    lml = m.log_marginal_likelihood();
    grad = m.log_marginal_gradient();
  } catch (const std::exception&) {
    return {p, -std::numeric_limits<double>::infinity(), false};
  }

  double step = 0.1;
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (grad.lpNorm<Eigen::Infinity>() < opt.grad_tol) break;
    bool improved = false;
    for (int ls = 0; ls < 25; ++ls) {
      Vector cand = clamp(p + step * grad);
      if ((cand - p).lpNorm<Eigen::Infinity>() < 1e-14) break;
      try {
        GpModel m = model_from_log_params(Z, y, cand, opt.convention);
        double cand_lml = m.log_marginal_likelihood();
        if (std::isfinite(cand_lml) && cand_lml > lml) {
          p = cand;
          lml = cand_lml;
          grad = m.log_marginal_gradient();
          improved = true;
          break;
        }
      } catch (const std::exception&) {
        // factorisation failure: shrink the step
      }
      step *= 0.5;
    }
    if (!improved) break;
    step = std::min(step * 1.5, 1.0);
  }
  return {p, lml, std::isfinite(lml)};
}

}  // namespace

GpModel gp_fit(const Matrix& Z, const Vector& y, const GpFitOptions& options,
               GpFitResult* result) {
  const Index n = Z.rows();
  const Index d = Z.cols();
  if (n < 2) throw std::invalid_argument("gp_fit: need at least 2 training rows");
  if (options.restarts < 1) throw std::invalid_argument("gp_fit: restarts must be >= 1");

  // Heuristic start: signal scale from the outputs, lengthscales from mean
  // squared coordinate distances.
  Vector heuristic(d + 2);
  double y_sd = std::sqrt((y.array() - y.mean()).square().sum() /
                          std::max<double>(1.0, static_cast<double>(n - 1)));
  if (!(y_sd > 1e-12)) y_sd = 1e-3;
  heuristic[0] = std::log(y_sd);
  for (Index k = 0; k < d; ++k) {
    double acc = 0.0;
    int cnt = 0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) {
        double diff = Z(i, k) - Z(j, k);
        acc += diff * diff;
        ++cnt;
      }
    double msd = cnt > 0 ? acc / cnt : 1.0;
    if (!(msd > 1e-12)) msd = 1.0;
    double ell = options.convention == KernelConvention::kLinearLengthscale
                     ? msd
                     : std::sqrt(msd);
    heuristic[k + 1] = std::log(ell);
  }
  heuristic[d + 1] = std::log(std::max(0.05 * y_sd, options.noise_floor));

  Vector best_p;
  double best_lml = -std::numeric_limits<double>::infinity();
  bool any_ok = false;

  for (int r = 0; r < options.restarts; ++r) {
    Vector start;
    if (r == 0) {
      start = heuristic;
    } else if (r == 1 && options.warm_start.has_value() &&
               options.warm_start->size() == d + 2) {
      start = *options.warm_start;
    } else {
      Rng rng(derive_seed(options.seed, seed_key::gp_fit, static_cast<uint64_t>(r)));
      start = heuristic;
      for (Index i = 0; i < start.size(); ++i) start[i] += rng.uniform(-2.0, 2.0);
    }
    AscentOutcome out = ascend(Z, y, start, options);
    if (out.ok && out.lml > best_lml) {
      best_lml = out.lml;
      best_p = out.p;
      any_ok = true;
    }
  }

  if (!any_ok) {
    // Every restart diverged: report the heuristic model with a warning flag.
    best_p = heuristic;
    for (Index i = 0; i < best_p.size(); ++i)
      best_p[i] = std::clamp(best_p[i], -options.log_bound, options.log_bound);
    best_p[d + 1] = std::max(best_p[d + 1], std::log(options.noise_floor));
  }
  GpModel model = model_from_log_params(Z, y, best_p, options.convention);
  if (result != nullptr) {
    result->converged = any_ok;
    result->best_lml = any_ok ? best_lml : model.log_marginal_likelihood();
  }
  return model;
}

}  // namespace redspace
