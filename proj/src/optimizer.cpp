#include "redspace/optimizer.hpp"

#include "redspace/doe.hpp"

#include <Eigen/Eigenvalues>

#include <memory>

namespace redspace {

Problem::Problem(DesignDomain domain, ScalarFn objective,
                 std::vector<ScalarFn> constraints, std::optional<double> known_optimum)
    : domain_(std::move(domain)),
      output_dim_(1 + static_cast<Index>(constraints.size())),
      known_optimum_(known_optimum) {
  evaluator_ = [objective = std::move(objective),
                constraints = std::move(constraints)](const Vector& s) {
    Vector y(1 + static_cast<Index>(constraints.size()));
    y[0] = objective(s);
    for (size_t j = 0; j < constraints.size(); ++j)
      y[static_cast<Index>(j) + 1] = constraints[j](s);
    return y;
  };
}

Problem::Problem(DesignDomain domain, Index output_dim, VectorFn evaluator,
                 std::optional<double> known_optimum)
    : domain_(std::move(domain)),
      output_dim_(output_dim),
      evaluator_(std::move(evaluator)),
      known_optimum_(known_optimum) {
  if (output_dim_ < 1) throw std::invalid_argument("Problem: output_dim must be >= 1");
}

Problem Problem::from_vector_evaluator(DesignDomain domain, Index output_dim,
                                       VectorFn evaluator,
                                       std::optional<double> known_optimum) {
  return Problem(std::move(domain), output_dim, std::move(evaluator), known_optimum);
}

Vector Problem::evaluate(const Vector& s) const {
  Vector y = evaluator_(s);
  if (y.size() != output_dim_)
    throw std::runtime_error("Problem: evaluator returned wrong output dimension");
  return y;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kBo: return "bo";
    case Method::kPcaBo: return "pca-bo";
    case Method::kPlsBo: return "pls-bo";
    case Method::kPplsBo: return "ppls-bo";
  }
  throw std::logic_error("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
  if (name == "bo") return Method::kBo;
  if (name == "pca-bo") return Method::kPcaBo;
  if (name == "pls-bo") return Method::kPlsBo;
  if (name == "ppls-bo") return Method::kPplsBo;
  throw std::invalid_argument("unknown method '" + name + "'");
}

Incumbent best_feasible(const Trace& trace) {
  if (trace.rows.empty()) throw std::invalid_argument("best_feasible: empty trace");
  const TraceRow* best = nullptr;
  bool any_feasible = false;
  for (const TraceRow& row : trace.rows) {
    if (row.feasible && !any_feasible) {
      any_feasible = true;
      best = &row;
      continue;
    }
    if (any_feasible) {
      if (row.feasible && row.y[0] < best->y[0]) best = &row;
    } else {
      if (best == nullptr || row.y[0] < best->y[0]) best = &row;
    }
  }
  return Incumbent{best->y[0], best->s, best->k, best->feasible};
}

namespace {

Matrix symmetric_sqrt(const Matrix& C) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(C);
  Vector vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

MarginalPredictor::MarginalPredictor(const std::vector<GpModel>& gps,
                                     const Matrix& posterior_means,
                                     const Matrix& posterior_cov, Index n_l,
                                     uint64_t seed) {
  if (n_l < 2)
    throw std::invalid_argument("MarginalPredictor: n_l must be >= 2");
  if (gps.empty()) throw std::invalid_argument("MarginalPredictor: no output models");
  const Index n = posterior_means.rows();
  const Index dz = posterior_means.cols();
  Matrix sqrt_cov = symmetric_sqrt(posterior_cov);
  Rng rng(derive_seed(seed, seed_key::mc_draws));
  per_draw_.reserve(static_cast<size_t>(n_l));
  test_offsets_.reserve(static_cast<size_t>(n_l));
  for (Index l = 0; l < n_l; ++l) {
    Matrix Z_l = posterior_means + rng.normal_matrix(n, dz) * sqrt_cov;
    std::vector<GpModel> draws;
    draws.reserve(gps.size());
    for (const GpModel& gp : gps) draws.push_back(gp.with_inputs(Z_l));
    per_draw_.push_back(std::move(draws));
    test_offsets_.push_back(sqrt_cov * rng.normal_vector(dz));
  }
}

std::vector<MarginalPrediction> MarginalPredictor::predict(const Vector& z_bar_star) const {
  const size_t n_outputs = per_draw_.front().size();
  const double n_l = static_cast<double>(per_draw_.size());
  std::vector<MarginalPrediction> out(n_outputs);
  for (size_t o = 0; o < n_outputs; ++o) {
    double sum_mu = 0.0, sum_mu_sq = 0.0, sum_var = 0.0;
    for (size_t l = 0; l < per_draw_.size(); ++l) {
      Vector z_star = z_bar_star + test_offsets_[l];
      double mu, var;
      per_draw_[l][o].predict_one(z_star, mu, var);
      sum_mu += mu;
      sum_mu_sq += mu * mu;
      sum_var += var;
    }
    double mean = sum_mu / n_l;
    double var_of_mu = std::max(0.0, (sum_mu_sq - n_l * mean * mean) / (n_l - 1.0));
    out[o].mean = mean;
    out[o].stddev = std::sqrt(var_of_mu + sum_var / n_l);
  }
  return out;
}

std::vector<MarginalPrediction> marginal_predictive(const std::vector<GpModel>& gps,
                                                    const PplsModel& model,
                                                    const Dataset& data,
                                                    const Vector& z_bar_star, Index n_l,
                                                    uint64_t seed) {
  BatchPosterior post = latent_posterior_batch(model, data.normalized_observations(),
                                               data.normalized_designs());
  MarginalPredictor predictor(gps, post.means, post.cov, n_l, seed);
  return predictor.predict(z_bar_star);
}

namespace {

Matrix initial_designs(const DesignDomain& domain, const DoeSpec& spec, uint64_t seed) {
  if (spec.kind == DoeSpec::Kind::kPlackettBurman) {
    Matrix X = plackett_burman(domain);
    if (spec.extra_lhs > 0) {
      Matrix L = latin_hypercube(spec.extra_lhs, domain, derive_seed(seed, seed_key::doe));
      Index base = X.rows();
      X.conservativeResize(base + L.rows(), Eigen::NoChange);
      X.bottomRows(L.rows()) = L;
    }
    return X;
  }
  if (spec.lhs_n < 2)
    throw std::invalid_argument("DoeSpec: LHS initialisation needs lhs_n >= 2");
  return latin_hypercube(spec.lhs_n, domain, derive_seed(seed, seed_key::doe));
}

DesignDomain normalized_domain(const DesignDomain& domain, const Dataset& data) {
  return DesignDomain(data.normalize_design(domain.lower),
                      data.normalize_design(domain.upper));
}

struct LoopState {
  const Problem& problem;
  const RunConfig& config;
  Matrix S;
  Matrix Y;
  Trace trace;
  bool any_feasible = false;
  double best_feasible_value = std::numeric_limits<double>::infinity();
  double best_overall_value = std::numeric_limits<double>::infinity();

  LoopState(const Problem& p, const RunConfig& c) : problem(p), config(c) {
    trace.method = method_name(c.method);
    trace.seed = c.seed;
  }

  void append(Index k, const Vector& s, const Vector& y) {
    bool feasible = true;
    for (Index j = 1; j < y.size(); ++j)
      if (y[j] > 0.0) feasible = false;
    if (feasible) {
      any_feasible = true;
      best_feasible_value = std::min(best_feasible_value, y[0]);
    }
    best_overall_value = std::min(best_overall_value, y[0]);
    double incumbent = any_feasible ? best_feasible_value : best_overall_value;
    trace.rows.push_back(TraceRow{k, s, y, feasible, incumbent});

    Index row = S.rows();
    S.conservativeResize(row + 1, problem.design_dim());
    Y.conservativeResize(row + 1, problem.output_dim());
    S.row(row) = s.transpose();
    Y.row(row) = y.transpose();
  }

  /// Evaluates the problem, appending the row; returns false (with the trace
  /// error set) when evaluation fails.
  bool evaluate_and_append(Index k, const Vector& s) {
    try {
      append(k, s, problem.evaluate(s));
      return true;
    } catch (const std::exception& err) {
      trace.error = "evaluation failed at k=" + std::to_string(k) + ": " + err.what();
      return false;
    }
  }

  bool run_initial_doe() {
    Matrix X0 = initial_designs(problem.domain(), config.init, config.seed);
    for (Index i = 0; i < X0.rows(); ++i)
      if (!evaluate_and_append(0, X0.row(i).transpose())) return false;
    return true;
  }

  double best_objective_normalized(const Dataset& data) const {
    double value = any_feasible ? best_feasible_value : best_overall_value;
    return (value - data.mean_y()[0]) / data.scale_y()[0];
  }
};

void validate_config(const Problem& problem, const RunConfig& config) {
  if (config.n_k < 0) throw std::invalid_argument("RunConfig: n_k must be >= 0");
  if (config.d_z < 1 || config.d_z > problem.design_dim())
    throw std::invalid_argument("RunConfig: require 1 <= d_z <= d_s");
  if (config.method == Method::kPplsBo && config.n_l < 2)
    throw std::invalid_argument("RunConfig: PPLS-BO requires n_l >= 2");
  if (config.acq_budget < 1)
    throw std::invalid_argument("RunConfig: acq_budget must be >= 1");
  if (config.acquisition.rho < -1.0 || config.acquisition.rho > 0.0)
    throw std::invalid_argument("RunConfig: rho must lie in [-1, 0]");
}

std::vector<GpModel> fit_output_gps(const Matrix& X, const Matrix& Y_norm,
                                    const RunConfig& config, Index k,
                                    std::vector<Vector>& warm_params) {
  std::vector<GpModel> gps;
  const Index dy = Y_norm.cols();
  gps.reserve(static_cast<size_t>(dy));
  for (Index o = 0; o < dy; ++o) {
    GpFitOptions opt;
    opt.restarts = config.gp_restarts;
    opt.convention = config.kernel_convention;
    opt.seed = derive_seed(config.seed, seed_key::gp_fit,
                           static_cast<uint64_t>(k * dy + o));
    if (static_cast<Index>(warm_params.size()) == dy &&
        warm_params[static_cast<size_t>(o)].size() == X.cols() + 2)
      opt.warm_start = warm_params[static_cast<size_t>(o)];
    gps.push_back(gp_fit(X, Y_norm.col(o), opt));
  }
  warm_params.clear();
  for (const GpModel& gp : gps) warm_params.push_back(gp.log_params());
  return gps;
}

using PredictFn = std::function<std::vector<MarginalPrediction>(const Vector&)>;
using IndicatorFn = std::function<bool(const Vector&)>;

std::vector<ConstraintPrediction> denormalized_constraints(
    const std::vector<MarginalPrediction>& preds, const Dataset& data) {
  std::vector<ConstraintPrediction> out;
  out.reserve(preds.size() > 0 ? preds.size() - 1 : 0);
  for (size_t o = 1; o < preds.size(); ++o) {
    double scale = data.scale_y()[static_cast<Index>(o)];
    double mean = preds[o].mean * scale + data.mean_y()[static_cast<Index>(o)];
    out.push_back(ConstraintPrediction{mean, preds[o].stddev * scale});
  }
  return out;
}

/// Maximise the constrained acquisition over the box. UCB (which can be
/// negative) goes through the generation-shifted weighted maximiser; EI is
/// non-negative and composes multiplicatively.
Vector propose(const RunConfig& config, Index k, Index input_dim, const Dataset& data,
               const PredictFn& predict, const IndicatorFn& inside, const LatentBox& box,
               double y_best_norm) {
  const AcquisitionConfig& acq = config.acquisition;
  const uint64_t seed = derive_seed(config.seed, seed_key::acquisition,
                                    static_cast<uint64_t>(k));
  std::vector<double> rho(static_cast<size_t>(data.output_dim() - 1), acq.rho);

  if (acq.kind == AcquisitionKind::kEi) {
    ScalarField field = [&](const Vector& z) {
      if (inside && !inside(z)) return 0.0;
      std::vector<MarginalPrediction> preds = predict(z);
      double value = ei(preds[0].mean, preds[0].stddev, y_best_norm, acq.xi);
      return value * constrained_weight(denormalized_constraints(preds, data), rho);
    };
    return maximize_acquisition(field, box, config.acq_budget, seed).x;
  }

  const double gamma = acq.gamma.at(k - 1, input_dim);
  // Base and weight are queried at the same point back to back.
  auto cache = std::make_shared<std::pair<Vector, std::vector<MarginalPrediction>>>();
  auto predictions_at = [cache, &predict](const Vector& z) {
    if (cache->first.size() != z.size() || cache->first != z) {
      cache->second = predict(z);
      cache->first = z;
    }
    return cache->second;
  };
  ScalarField base = [=](const Vector& z) {
    std::vector<MarginalPrediction> preds = predictions_at(z);
    return ucb(preds[0].mean, preds[0].stddev, gamma);
  };
  ScalarField weight = [&, predictions_at](const Vector& z) {
    if (inside && !inside(z)) return 0.0;
    std::vector<MarginalPrediction> preds = predictions_at(z);
    return constrained_weight(denormalized_constraints(preds, data), rho);
  };
  return maximize_acquisition_weighted(base, weight, box, config.acq_budget, seed).x;
}

PredictFn gp_predict_fn(const std::vector<GpModel>& gps) {
  return [&gps](const Vector& x) {
    std::vector<MarginalPrediction> preds(gps.size());
    for (size_t o = 0; o < gps.size(); ++o) {
      double mu, var;
      gps[o].predict_one(x, mu, var);
      preds[o] = MarginalPrediction{mu, std::sqrt(var)};
    }
    return preds;
  };
}

}  // namespace

Trace run_bo(const Problem& problem, const RunConfig& config) {
  validate_config(problem, config);
  LoopState state(problem, config);
  if (!state.run_initial_doe()) return state.trace;

  std::vector<Vector> warm;
  for (Index k = 1; k <= config.n_k; ++k) {
    try {
      Dataset data(state.S, state.Y);
      Matrix X = data.normalized_designs();
      std::vector<GpModel> gps =
          fit_output_gps(X, data.normalized_observations(), config, k, warm);

      DesignDomain norm_dom = normalized_domain(problem.domain(), data);
      LatentBox box = as_box(norm_dom);
      Vector x_star = propose(config, k, problem.design_dim(), data,
                              gp_predict_fn(gps), nullptr, box,
                              state.best_objective_normalized(data));

      IterationDigest digest;
      digest.k = k;
      for (const GpModel& gp : gps) digest.gp_log_params.push_back(gp.log_params());
      state.trace.digests.push_back(std::move(digest));

      Vector s = problem.domain().clip(data.denormalize_design(x_star));
      if (!state.evaluate_and_append(k, s)) break;
    } catch (const std::exception& err) {
      state.trace.error = "iteration k=" + std::to_string(k) + ": " + err.what();
      break;
    }
  }
  return state.trace;
}

namespace {

Trace run_subspace_bo(const Problem& problem, const RunConfig& config) {
  LoopState state(problem, config);
  if (!state.run_initial_doe()) return state.trace;

  std::vector<Vector> warm;
  for (Index k = 1; k <= config.n_k; ++k) {
    try {
      Dataset data(state.S, state.Y);
      Matrix S_norm = data.normalized_designs();

      Matrix W;
      std::optional<PlsBasis> pls;
      if (config.method == Method::kPlsBo) {
        pls = nipals_fit(data, config.d_z);
        W = pls->W;
      } else {
        W = pca_fit(data, config.d_z);
      }

      Matrix Z = S_norm * W;
      std::vector<GpModel> gps =
          fit_output_gps(Z, data.normalized_observations(), config, k, warm);

      DesignDomain norm_dom = normalized_domain(problem.domain(), data);
      LatentBox box = latent_box(W, norm_dom);
      IndicatorFn inside = [&](const Vector& z) { return indicator(W, z, norm_dom); };
      Vector z_star = propose(config, k, config.d_z, data, gp_predict_fn(gps), inside,
                              box, state.best_objective_normalized(data));

      IterationDigest digest;
      digest.k = k;
      digest.basis = W;
      for (const GpModel& gp : gps) digest.gp_log_params.push_back(gp.log_params());
      state.trace.digests.push_back(std::move(digest));

      Vector s_norm = pls ? pls_reconstruct(z_star, *pls) : W * z_star;
      Vector s = problem.domain().clip(data.denormalize_design(s_norm));
      if (!state.evaluate_and_append(k, s)) break;
    } catch (const std::exception& err) {
      state.trace.error = "iteration k=" + std::to_string(k) + ": " + err.what();
      break;
    }
  }
  return state.trace;
}

}  // namespace

Trace run_pls_bo(const Problem& problem, const RunConfig& config) {
  validate_config(problem, config);
  return run_subspace_bo(problem, config);
}

Trace run_pca_bo(const Problem& problem, const RunConfig& config) {
  validate_config(problem, config);
  return run_subspace_bo(problem, config);
}

Trace run_ppls_bo(const Problem& problem, const RunConfig& config) {
  validate_config(problem, config);
  if (config.n_l < 2) throw std::invalid_argument("run_ppls_bo: n_l must be >= 2");
  LoopState state(problem, config);
  if (!state.run_initial_doe()) return state.trace;

  std::vector<Vector> warm;
  std::optional<PplsModel> previous;
  for (Index k = 1; k <= config.n_k; ++k) {
    try {
      Dataset data(state.S, state.Y);
      Matrix S_norm = data.normalized_designs();
      Matrix Y_norm = data.normalized_observations();

      EmOptions em_options;
      em_options.seed = derive_seed(config.seed, seed_key::em_init,
                                    static_cast<uint64_t>(k));
      EmFitInfo info;
      std::optional<PplsModel> init =
          config.ppls_warm_start ? previous : std::nullopt;
      PplsModel model =
          em_fit(data, config.d_z, config.n_t, std::move(init), em_options, &info);
      previous = model;

      BatchPosterior post = latent_posterior_batch(model, Y_norm, S_norm);
      std::vector<GpModel> gps =
          fit_output_gps(post.means, Y_norm, config, k, warm);

      MarginalPredictor predictor(
          gps, post.means, post.cov, config.n_l,
          derive_seed(config.seed, seed_key::mc_draws, static_cast<uint64_t>(k)));

      DesignDomain norm_dom = normalized_domain(problem.domain(), data);
      LatentBox box = latent_box(model.W, norm_dom);
      IndicatorFn inside = [&](const Vector& z) {
        return indicator(model.W, z, norm_dom);
      };
      PredictFn predict = [&predictor](const Vector& z) {
        return predictor.predict(z);
      };
      Vector z_bar = propose(config, k, config.d_z, data, predict, inside, box,
                             state.best_objective_normalized(data));

      IterationDigest digest;
      digest.k = k;
      digest.elbo = info.final_elbo;
      digest.basis = model.W;
      for (const GpModel& gp : gps) digest.gp_log_params.push_back(gp.log_params());
      state.trace.digests.push_back(std::move(digest));

      DiagonalGaussian density = conditional_design_density(model, z_bar);
      Rng sampler(derive_seed(config.seed, seed_key::design_sample,
                              static_cast<uint64_t>(k)));
      Vector s_norm = density.sample(sampler);
      Vector s = problem.domain().clip(data.denormalize_design(s_norm));
      if (!state.evaluate_and_append(k, s)) break;
    } catch (const std::exception& err) {
      state.trace.error = "iteration k=" + std::to_string(k) + ": " + err.what();
      break;
    }
  }
  return state.trace;
}

Trace run_method(const Problem& problem, const RunConfig& config) {
  switch (config.method) {
    case Method::kBo: return run_bo(problem, config);
    case Method::kPcaBo: return run_pca_bo(problem, config);
    case Method::kPlsBo: return run_pls_bo(problem, config);
    case Method::kPplsBo: return run_ppls_bo(problem, config);
  }
  throw std::logic_error("run_method: unknown method");
}

}  // namespace redspace
