// Acceptance suite: one criterion per number, each printing a PASS/FAIL line.
// Run all with no arguments or a single one with --criterion N. The
// subprocess-equivalence checks need --cli <path-to-redspace-binary>.

#include "redspace/benchmarks.hpp"
#include "redspace/doe.hpp"
#include "redspace/experiment.hpp"
#include "redspace/gp.hpp"
#include "redspace/ppls.hpp"
#include "redspace/reduction.hpp"
#include "redspace/trace_io.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

using namespace redspace;

namespace {

struct Checker {
  int failures = 0;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    details.push_back(std::string(ok ? "    ok   " : "    FAIL ") + what);
    if (!ok) ++failures;
  }
};

std::string g_cli_path;
Index g_nl = 200;  // criterion 2/4 MC budget; --full restores 1000

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_of(const std::vector<double>& values) {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

/// Run (config, problem) jobs on a small pool; order of results is stable.
std::vector<Trace> run_pool(const Problem& problem, std::vector<RunConfig> configs) {
  std::vector<Trace> traces(configs.size());
  std::mutex m;
  size_t next = 0;
  auto worker = [&]() {
    while (true) {
      size_t i;
      {
        std::lock_guard<std::mutex> lock(m);
        if (next >= configs.size()) return;
        i = next++;
      }
      traces[i] = run_method(problem, configs[i]);
    }
  };
  unsigned n_workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return traces;
}

Dataset illustrative_initial_data(Index extra_lhs, uint64_t seed) {
  const BenchmarkSpec& bench = find_benchmark("illustrative-constrained");
  Matrix S = plackett_burman(bench.problem.domain());
  if (extra_lhs > 0) {
    Matrix L = latin_hypercube(extra_lhs, bench.problem.domain(),
                               derive_seed(seed, seed_key::doe));
    Index base = S.rows();
    S.conservativeResize(base + L.rows(), Eigen::NoChange);
    S.bottomRows(L.rows()) = L;
  }
  Matrix Y(S.rows(), 2);
  for (Index i = 0; i < S.rows(); ++i)
    Y.row(i) = bench.problem.evaluate(S.row(i).transpose()).transpose();
  return normalize(std::move(S), std::move(Y));
}

/// Constrained minimum of the illustrative objective over a dense (s1, s2)
/// grid with trailing coordinates at zero.
double illustrative_grid_optimum(Index g = 2000) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < g; ++i) {
    double s1 = static_cast<double>(i) / (g - 1);
    double a = (6.0 * s1 * s1 + 3.0) / 9.0 * std::sin(9.0 * s1 * s1 + 1.0);
    for (Index j = 0; j < g; ++j) {
      double s2 = static_cast<double>(j) / (g - 1);
      if (0.75 - s1 - s2 > 0.0) continue;
      best = std::min(best, a * std::cos(6.0 * s2 * s2 + 2.0));
    }
  }
  return best;
}

RunConfig illustrative_config(Method method, Index d_z, uint64_t seed, Index n_k) {
  RunConfig config;
  config.method = method;
  config.d_z = d_z;
  config.n_k = n_k;
  config.n_l = g_nl;
  config.seed = seed;
  config.acquisition.kind = AcquisitionKind::kEi;
  config.acquisition.xi = 0.0;
  config.init.kind = DoeSpec::Kind::kPlackettBurman;
  config.init.extra_lhs = 3;
  return config;
}

// --- criterion 1: Table 1 bases ------------------------------------------

void criterion_1(Checker& c) {
  Dataset data = illustrative_initial_data(3, 4);

  PlsBasis pls = nipals_fit(data, 2);
  c.check(std::abs(std::abs(pls.W(0, 0)) - 0.925) <= 0.05,
          "PLS |W11| = " + fmt(std::abs(pls.W(0, 0))) + " within 0.925 +/- 0.05");
  c.check(std::abs(std::abs(pls.W(1, 0)) - 0.381) <= 0.05,
          "PLS |W21| = " + fmt(std::abs(pls.W(1, 0))) + " within 0.381 +/- 0.05");

  PplsModel ppls = em_fit(data, 2, 100);
  c.check(std::abs(std::abs(ppls.W(0, 0)) - 0.925) <= 0.05,
          "PPLS |W11| = " + fmt(std::abs(ppls.W(0, 0))) + " within 0.925 +/- 0.05");
  c.check(std::abs(std::abs(ppls.W(1, 0)) - 0.381) <= 0.05,
          "PPLS |W21| = " + fmt(std::abs(ppls.W(1, 0))) + " within 0.381 +/- 0.05");

  Matrix pca = pca_fit(data, 2);
  double max_entry = pca.topRows(2).cwiseAbs().maxCoeff();
  c.check(max_entry < 0.5,
          "PCA first-two-row magnitudes " + fmt(max_entry) + " < 0.5");
}

// --- criterion 2: illustrative convergence --------------------------------

void criterion_2(Checker& c) {
  const BenchmarkSpec& bench = find_benchmark("illustrative-constrained");
  double oracle = illustrative_grid_optimum();
  const Index n_seeds = 10;

  struct Arm {
    Method method;
    Index d_z;
    std::vector<double> finals;
  };
  std::vector<Arm> arms = {{Method::kPplsBo, 2, {}},
                           {Method::kPlsBo, 2, {}},
                           {Method::kPcaBo, 8, {}},
                           {Method::kBo, 2, {}}};
  for (Arm& arm : arms) {
    std::vector<RunConfig> configs;
    for (uint64_t seed = 0; seed < n_seeds; ++seed)
      configs.push_back(illustrative_config(arm.method, arm.d_z, seed, 100));
    std::vector<Trace> traces = run_pool(bench.problem, std::move(configs));
    for (const Trace& trace : traces) {
      if (trace.error.has_value()) {
        c.check(false, method_name(arm.method) + " run failed: " + *trace.error);
        return;
      }
      arm.finals.push_back(best_feasible(trace).value);
    }
  }

  double med_ppls = median(arms[0].finals);
  double med_pls = median(arms[1].finals);
  double med_pca = median(arms[2].finals);
  double med_bo = median(arms[3].finals);
  double band = 0.01 * std::abs(oracle);

  c.check(std::abs(med_ppls - oracle) <= band,
          "PPLS-BO median " + fmt(med_ppls) + " within 1% of oracle " + fmt(oracle));
  c.check(std::abs(med_pls - oracle) <= band,
          "PLS-BO median " + fmt(med_pls) + " within 1% of oracle " + fmt(oracle));
  c.check(med_pca < med_bo,
          "PCA-BO median " + fmt(med_pca) + " strictly better than BO " + fmt(med_bo));
  c.check(med_ppls <= med_pls && med_pls <= med_pca && med_pca <= med_bo,
          "ordering PPLS <= PLS <= PCA <= BO (" + fmt(med_ppls) + ", " + fmt(med_pls) +
              ", " + fmt(med_pca) + ", " + fmt(med_bo) + ")");
}

// --- criterion 3: misspecification robustness -----------------------------

void criterion_3(Checker& c) {
  const BenchmarkSpec& bench = find_benchmark("illustrative-constrained");
  const Index n_seeds = 10;
  const Index n_init = 27;

  auto residuals = [&](const Trace& trace) {
    // Normalisation statistics recomputed from the trace prefix, basis from
    // the per-iteration digest.
    std::vector<double> out;
    for (size_t d = 0; d < trace.digests.size(); ++d) {
      size_t rows_before = static_cast<size_t>(n_init) + d;
      Matrix S(rows_before, 20), Y(rows_before, 2);
      for (size_t i = 0; i < rows_before; ++i) {
        S.row(static_cast<Index>(i)) = trace.rows[i].s.transpose();
        Y.row(static_cast<Index>(i)) = trace.rows[i].y.transpose();
      }
      Dataset data = normalize(std::move(S), std::move(Y));
      Vector s_norm = data.normalize_design(trace.rows[rows_before].s);
      const Matrix& W = trace.digests[d].basis;
      out.push_back((s_norm - W * W.transpose() * s_norm).norm());
    }
    return out;
  };

  std::vector<double> ppls_finals, pls_finals;
  bool ppls_off_line_each_run = true;
  bool pls_on_line_always = true;

  std::vector<RunConfig> ppls_configs, pls_configs;
  for (uint64_t seed = 0; seed < n_seeds; ++seed) {
    ppls_configs.push_back(illustrative_config(Method::kPplsBo, 1, seed, 10));
    pls_configs.push_back(illustrative_config(Method::kPlsBo, 1, seed, 10));
  }
  std::vector<Trace> ppls_traces = run_pool(bench.problem, std::move(ppls_configs));
  std::vector<Trace> pls_traces = run_pool(bench.problem, std::move(pls_configs));

  for (const Trace& trace : ppls_traces) {
    ppls_finals.push_back(best_feasible(trace).value);
    std::vector<double> r = residuals(trace);
    ppls_off_line_each_run &= std::any_of(r.begin(), r.end(),
                                          [](double v) { return v > 1e-3; });
  }
  for (const Trace& trace : pls_traces) {
    pls_finals.push_back(best_feasible(trace).value);
    for (double v : residuals(trace)) pls_on_line_always &= v < 1e-10;
  }

  c.check(median(ppls_finals) < median(pls_finals),
          "PPLS-BO median " + fmt(median(ppls_finals)) + " strictly below PLS-BO " +
              fmt(median(pls_finals)));
  c.check(ppls_off_line_each_run,
          "every PPLS-BO run proposes off the latent line (residual > 1e-3)");
  c.check(pls_on_line_always, "all PLS-BO proposals on the line (residual < 1e-10)");
}

// --- criterion 4: cantilever direction ------------------------------------

void criterion_4(Checker& c) {
  const BenchmarkSpec& bench = find_benchmark("cantilever-periodic-unconstrained");
  const double target = bench.targets.target;
  const Index n_seeds = 10;
  const Index n_k = 100;

  for (AcquisitionKind kind : {AcquisitionKind::kUcb, AcquisitionKind::kEi}) {
    std::string label = kind == AcquisitionKind::kUcb ? "UCB" : "EI";
    auto arm_mean = [&](Method method, Index d_z) {
      std::vector<RunConfig> configs;
      for (uint64_t seed = 0; seed < n_seeds; ++seed) {
        RunConfig config;
        config.method = method;
        config.d_z = d_z;
        config.n_k = n_k;
        config.n_l = g_nl;
        config.seed = seed;
        config.acquisition.kind = kind;
        config.acquisition.gamma.adaptive = true;
        config.acquisition.xi = 0.0;
        config.init.kind = DoeSpec::Kind::kPlackettBurman;
        config.init.extra_lhs = 3;
        configs.push_back(config);
      }
      std::vector<Trace> traces = run_pool(bench.problem, std::move(configs));
      std::vector<double> iters;
      for (const Trace& trace : traces) {
        std::optional<Index> reached = iterations_to_target(trace, target);
        iters.push_back(static_cast<double>(reached.value_or(n_k)));
      }
      return mean_of(iters);
    };

    double ppls = arm_mean(Method::kPplsBo, 3);
    double pls = arm_mean(Method::kPlsBo, 3);
    double bo = arm_mean(Method::kBo, 5);
    c.check(ppls <= pls && pls < bo,
            label + " ordering PPLS <= PLS < BO (" + fmt(ppls) + ", " + fmt(pls) +
                ", " + fmt(bo) + ")");
    c.check(ppls <= 0.5 * bo,
            label + " PPLS mean " + fmt(ppls) + " at most half of BO " + fmt(bo));
  }
}

// --- criterion 5: EM correctness ------------------------------------------

void criterion_5(Checker& c) {
  // (a) exact-posterior ELBO non-decreasing on 50 random synthetic datasets.
  bool monotone = true;
  double worst = 0.0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed * 7 + 1);
    Index n = 12 + static_cast<Index>(rng.uniform_index(20));
    Index ds = 3 + static_cast<Index>(rng.uniform_index(5));
    Index dy = 1 + static_cast<Index>(rng.uniform_index(3));
    Index dz = 1 + static_cast<Index>(rng.uniform_index(std::min<Index>(ds, 3)));
    double noise = 0.05 + 0.5 * rng.uniform();
    Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(ds, dz));
    Matrix W = qr.householderQ() * Matrix::Identity(ds, dz);
    Matrix Z = rng.normal_matrix(n, dz);
    Matrix S = Z * W.transpose() + noise * rng.normal_matrix(n, ds);
    Matrix Y = Z * rng.normal_matrix(dy, dz).transpose() +
               noise * rng.normal_matrix(n, dy);
    Dataset data = normalize(std::move(S), std::move(Y));
    EmFitInfo info;
    EmOptions options;
    options.seed = seed;
    em_fit(data, dz, 40, std::nullopt, options, &info);
    for (size_t t = 1; t < info.elbo_trace.size(); ++t) {
      double drop = info.elbo_trace[t - 1] - info.elbo_trace[t];
      worst = std::max(worst, drop);
      if (drop > 1e-8) monotone = false;
    }
  }
  c.check(monotone, "ELBO non-decreasing on 50 synthetic datasets (worst drop " +
                        fmt(worst) + ")");

  // (b) planted-subspace recovery on noiseless data.
  bool recovered = true;
  double worst_angle = 0.0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed + 100);
    Index ds = 6, dz = 2, n = 40;
    Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(ds, dz));
    Matrix W = qr.householderQ() * Matrix::Identity(ds, dz);
    Matrix Z = rng.normal_matrix(n, dz);
    Matrix S = Z * W.transpose();
    Matrix Y = Z * rng.normal_matrix(2, dz).transpose();
    Dataset data = normalize(std::move(S), std::move(Y));
    PplsModel fit = em_fit(data, dz, 200, std::nullopt, EmOptions{seed});
    Eigen::JacobiSVD<Matrix> svd(data.normalized_designs(),
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
    Matrix target = svd.matrixV().leftCols(dz);
    Eigen::JacobiSVD<Matrix> overlap(fit.W.transpose() * target);
    double angle =
        std::acos(std::clamp(overlap.singularValues().minCoeff(), -1.0, 1.0));
    worst_angle = std::max(worst_angle, angle);
    if (angle >= 1e-3) recovered = false;
  }
  c.check(recovered, "planted-subspace principal angle < 1e-3 rad (worst " +
                         fmt(worst_angle) + ")");

  // (c) latent posterior vs 1-D quadrature.
  double worst_density_err = 0.0;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed + 30);
    PplsModel m;
    Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(3, 1));
    m.W = qr.householderQ() * Matrix::Identity(3, 1);
    m.Q = Matrix::Ones(2, 1) / std::sqrt(2.0);
    m.sigma_s = Vector::Constant(3, 0.2 + 0.3 * rng.uniform());
    m.sigma_y = Vector::Constant(2, 0.2 + 0.3 * rng.uniform());
    Vector y = rng.normal_vector(2);
    Vector s = rng.normal_vector(3);
    LatentPosterior post = latent_posterior(m, y, s);

    auto log_normal = [](const Vector& x, const Vector& mu, const Vector& var) {
      double acc = 0.0;
      for (Index i = 0; i < x.size(); ++i)
        acc += -0.5 * (std::log(2.0 * M_PI * var[i]) +
                       (x[i] - mu[i]) * (x[i] - mu[i]) / var[i]);
      return acc;
    };
    const Index grid = 40001;
    const double lo = -8.0, h = 16.0 / (grid - 1);
    auto joint = [&](double z) {
      Vector zz(1);
      zz << z;
      return std::exp(log_normal(y, m.Q * zz, m.sigma_y) +
                      log_normal(s, m.W * zz, m.sigma_s) -
                      0.5 * (std::log(2.0 * M_PI) + z * z));
    };
    double evidence = 0.0;
    for (Index i = 0; i < grid; ++i)
      evidence += ((i == 0 || i == grid - 1) ? 0.5 : 1.0) * joint(lo + h * i);
    evidence *= h;
    for (double z : {-1.2, -0.3, 0.5, 1.4}) {
      double density = joint(z) / evidence;
      double analytic =
          std::exp(-0.5 * (z - post.mean[0]) * (z - post.mean[0]) / post.cov(0, 0)) /
          std::sqrt(2.0 * M_PI * post.cov(0, 0));
      worst_density_err = std::max(worst_density_err, std::abs(density - analytic));
    }
  }
  c.check(worst_density_err < 1e-6, "latent posterior matches quadrature (worst err " +
                                        fmt(worst_density_err) + ")");
}

// --- criterion 6: GP correctness ------------------------------------------

void criterion_6(Checker& c) {
  Rng rng(5);
  // Interpolation and reversion.
  Matrix Z = rng.normal_matrix(10, 2);
  Vector y = rng.normal_vector(10);
  KernelParams theta;
  theta.sigma_f = 1.0;
  theta.lengthscales = Vector::Constant(2, 1.0);
  GpModel gp(Z, y, theta, 0.0);
  GaussianPrediction at_train = gp.predict(Z);
  c.check((at_train.mean - y).cwiseAbs().maxCoeff() < 1e-6 &&
              at_train.variance.maxCoeff() < 1e-6,
          "noise-free interpolation within 1e-6");
  Matrix far(1, 2);
  far << 200.0, 200.0;
  GaussianPrediction away = gp.predict(far);
  c.check(std::abs(away.mean[0]) < 1e-6 && std::abs(away.variance[0] - 1.0) < 1e-6,
          "prior reversion far from data within 1e-6");

  // Gradient vs central finite differences on 100 random configurations.
  double worst_rel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Index n = 5 + static_cast<Index>(rng.uniform_index(8));
    Index d = 1 + static_cast<Index>(rng.uniform_index(3));
    Matrix Zt = rng.normal_matrix(n, d);
    Vector yt = rng.normal_vector(n);
    Vector logp(d + 2);
    for (Index i = 0; i < d + 2; ++i) logp[i] = rng.uniform(-1.0, 1.0);
    auto build = [&](const Vector& p) {
      KernelParams t;
      t.sigma_f = std::exp(p[0]);
      t.lengthscales = p.segment(1, d).array().exp();
      return GpModel(Zt, yt, t, std::exp(p[d + 1]));
    };
    Vector grad = build(logp).log_marginal_gradient();
    for (Index j = 0; j < d + 2; ++j) {
      Vector hi = logp, lo = logp;
      hi[j] += 1e-5;
      lo[j] -= 1e-5;
      double fd = (build(hi).log_marginal_likelihood() -
                   build(lo).log_marginal_likelihood()) /
                  2e-5;
      double scale = std::max({std::abs(fd), std::abs(grad[j]), 1e-8});
      worst_rel = std::max(worst_rel, std::abs(grad[j] - fd) / scale);
    }
  }
  c.check(worst_rel < 1e-4,
          "lml gradient vs finite differences, worst rel err " + fmt(worst_rel));

  // Predictive covariance PSD.
  double worst_eig = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix Zt = rng.normal_matrix(12, 2);
    Vector yt = rng.normal_vector(12);
    KernelParams t;
    t.sigma_f = 0.5 + rng.uniform();
    t.lengthscales = Vector::Constant(2, 0.4 + rng.uniform());
    GpModel model(Zt, yt, t, 0.05);
    GaussianPrediction pred = model.predict(rng.normal_matrix(8, 2), true);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(*pred.covariance);
    worst_eig = std::min(worst_eig, eig.eigenvalues().minCoeff());
  }
  c.check(worst_eig > -1e-8,
          "predictive covariance PSD within 1e-8 (min eig " + fmt(worst_eig) + ")");
}

// --- criterion 7: marginal predictive -------------------------------------

void criterion_7(Checker& c) {
  Rng rng(11);
  Matrix Z = rng.normal_matrix(14, 2);
  Vector y = (Z.col(0).array().sin() - 0.3 * Z.col(1).array()).matrix();
  KernelParams theta;
  theta.sigma_f = 1.0;
  theta.lengthscales = Vector::Constant(2, 0.9);
  std::vector<GpModel> gps;
  gps.emplace_back(Z, y, theta, 0.05);

  // Degenerate latent distribution collapses to the plain GP.
  MarginalPredictor collapsed(gps, Z, Matrix::Zero(2, 2), 64, 5);
  double worst_collapse = 0.0;
  for (int t = 0; t < 10; ++t) {
    Vector zq = rng.normal_vector(2);
    double mu, var;
    gps[0].predict_one(zq, mu, var);
    std::vector<MarginalPrediction> pred = collapsed.predict(zq);
    worst_collapse = std::max({worst_collapse, std::abs(pred[0].mean - mu),
                               std::abs(pred[0].stddev - std::sqrt(var))});
  }
  c.check(worst_collapse < 1e-10,
          "degenerate-latent collapse to plain GP (worst " + fmt(worst_collapse) + ")");

  // Total-variance lower bound and MC consistency against a large-budget
  // reference on a fixed small model.
  Matrix cov = 0.04 * Matrix::Identity(2, 2);
  MarginalPredictor fast(gps, Z, cov, 1000, 21);
  MarginalPredictor reference(gps, Z, cov, 100000, 22);

  // Oracle re-estimate of the two variance components with its own stream.
  bool variance_bound_ok = true;
  double worst_gap = 0.0;
  Rng oracle_rng(99);
  Matrix sqrt_cov = 0.2 * Matrix::Identity(2, 2);
  for (int t = 0; t < 5; ++t) {
    Vector zq = rng.normal_vector(2);
    std::vector<MarginalPrediction> est = fast.predict(zq);
    std::vector<MarginalPrediction> ref = reference.predict(zq);

    const Index n_oracle = 4000;
    double sum_mu = 0.0, sum_mu_sq = 0.0, sum_var = 0.0;
    for (Index l = 0; l < n_oracle; ++l) {
      Matrix Zl = Z + oracle_rng.normal_matrix(14, 2) * sqrt_cov;
      GpModel redrawn = gps[0].with_inputs(Zl);
      Vector zs = zq + sqrt_cov * oracle_rng.normal_vector(2);
      double mu, var;
      redrawn.predict_one(zs, mu, var);
      sum_mu += mu;
      sum_mu_sq += mu * mu;
      sum_var += var;
    }
    double mu_mean = sum_mu / n_oracle;
    double var_of_mu = sum_mu_sq / n_oracle - mu_mean * mu_mean;
    double mean_gp_var = sum_var / n_oracle;

    if (est[0].stddev * est[0].stddev < mean_gp_var * 0.9) variance_bound_ok = false;

    double se = std::sqrt(var_of_mu * (1.0 / 1000.0 + 1.0 / 100000.0));
    worst_gap = std::max(worst_gap,
                         std::abs(est[0].mean - ref[0].mean) / std::max(se, 1e-12));
  }
  c.check(variance_bound_ok, "sigma-hat^2 >= mean GP variance on tested points");
  c.check(worst_gap < 3.0, "n_l=1e3 mean within 3 SE of n_l=1e5 reference (worst " +
                               fmt(worst_gap) + " SE)");
}

// --- criterion 8: acquisition suite ---------------------------------------

void criterion_8(Checker& c) {
  Rng rng(31);
  // EI against the MC improvement oracle on 50 random triples.
  bool ei_ok = true;
  double worst_sigma_gap = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    double mu = rng.uniform(-2.0, 2.0);
    double sigma = 0.05 + 2.0 * rng.uniform();
    double y_best = rng.uniform(-2.0, 2.0);
    const Index n = 200000;
    double acc = 0.0, acc_sq = 0.0;
    for (Index i = 0; i < n; ++i) {
      double imp = std::max(y_best - (mu + sigma * rng.normal()), 0.0);
      acc += imp;
      acc_sq += imp * imp;
    }
    double mc = acc / n;
    double se = std::sqrt((acc_sq / n - mc * mc) / n);
    // Deep-tail triples can see zero MC hits, making the estimated SE zero
    // while the true value is a positive sub-resolution tail; floor the
    // tolerance at the MC resolution sigma/n.
    double excess = std::abs(ei(mu, sigma, y_best, 0.0) - mc) -
                    (3.0 * se + 10.0 * sigma / static_cast<double>(n));
    worst_sigma_gap = std::max(worst_sigma_gap, excess);
    if (excess > 0.0) ei_ok = false;
  }
  c.check(ei_ok, "EI within 3 MC standard errors on 50 triples (worst excess " +
                     fmt(worst_sigma_gap) + ")");

  // Adaptive gamma schedule, exactly.
  bool gamma_ok = true;
  for (Index k = 0; k < 200; ++k)
    for (Index dz : {1, 2, 3, 8})
      if (GammaSchedule::adaptive_gamma(k, dz) !=
          0.2 * static_cast<double>(dz) * std::log(2.0 * static_cast<double>(k + 1)))
        gamma_ok = false;
  c.check(gamma_ok, "UCB gamma schedule reproduces 0.2 d_z ln(2(k+1)) exactly");

  c.check(constrained_weight({{0.0, 1.0}}, {-1.0}) == 0.5,
          "constrained weight at zero-mean constraint equals 0.5");

  // Maximiser against a dense 1000x1000 grid.
  auto field = [](const Vector& z) {
    return std::sin(3.0 * z[0]) * std::cos(2.0 * z[1]) +
           0.5 * std::exp(-((z[0] - 0.6) * (z[0] - 0.6) +
                            (z[1] + 0.3) * (z[1] + 0.3)) /
                          0.05);
  };
  double best = -std::numeric_limits<double>::infinity();
  const Index g = 1000;
  for (Index i = 0; i < g; ++i)
    for (Index j = 0; j < g; ++j) {
      Vector z(2);
      z << -2.0 + 4.0 * static_cast<double>(i) / (g - 1),
          -2.0 + 4.0 * static_cast<double>(j) / (g - 1);
      best = std::max(best, field(z));
    }
  LatentBox box{Vector::Constant(2, -2.0), Vector::Constant(2, 2.0)};
  MaximizerResult got = maximize_acquisition(field, box, 4000, 13);
  c.check(std::abs(got.value - best) < 1e-3,
          "maximiser matches grid argmax value within 1e-3 (gap " +
              fmt(std::abs(got.value - best)) + ")");
}

// --- criterion 9: determinism ---------------------------------------------

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void criterion_9(Checker& c) {
  namespace fs = std::filesystem;
  fs::path dir_a = fs::temp_directory_path() / "redspace_acc9_a";
  fs::path dir_b = fs::temp_directory_path() / "redspace_acc9_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  auto config_text = [](const std::string& out) {
    return std::string(R"({"benchmark": "illustrative-constrained",
      "methods": ["bo", "ppls-bo"], "seeds": [0, 1], "out": ")") + out + R"(",
      "defaults": {"n_k": 3, "d_z": 2, "n_l": 50, "acq_budget": 150,
                   "gp_restarts": 1, "init": {"kind": "lhs", "n": 6}}})";
  };
  ExperimentResult first = run_experiment(parse_config_text(config_text(dir_a.string())));
  ExperimentResult second = run_experiment(parse_config_text(config_text(dir_b.string())));
  bool identical = first.failures == 0 && second.failures == 0;
  for (const RunOutcome& run : first.runs)
    identical &= slurp(dir_a / run.trace_file) == slurp(dir_b / run.trace_file);
  c.check(identical, "experiment rerun produces byte-identical trace CSVs");
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  if (g_cli_path.empty()) {
    c.check(false, "subprocess equivalence needs --cli <path>");
    return;
  }
  EvaluatorSpec spec;
  spec.command = {g_cli_path, "evaluate", "illustrative-constrained"};
  spec.output_dim = 2;
  spec.domain = DesignDomain::unit_cube(20);

  RunConfig config;
  config.method = Method::kPplsBo;
  config.seed = 7;
  config.d_z = 2;
  config.n_k = 3;
  config.n_l = 50;
  config.acq_budget = 150;
  config.gp_restarts = 1;
  config.init.kind = DoeSpec::Kind::kLatinHypercube;
  config.init.lhs_n = 6;

  Trace subprocess_trace = run_method(external_evaluator(spec), config);
  Trace in_process =
      run_method(find_benchmark("illustrative-constrained").problem, config);
  c.check(!subprocess_trace.error.has_value() &&
              trace_to_csv(subprocess_trace) == trace_to_csv(in_process),
          "subprocess-evaluator trace equals in-process trace");
}

struct Criterion {
  int number;
  const char* name;
  void (*run)(Checker&);
};

const Criterion kCriteria[] = {
    {1, "Table 1 bases", criterion_1},
    {2, "illustrative convergence", criterion_2},
    {3, "misspecification robustness", criterion_3},
    {4, "cantilever direction", criterion_4},
    {5, "EM correctness", criterion_5},
    {6, "GP correctness", criterion_6},
    {7, "marginal predictive", criterion_7},
    {8, "acquisition suite", criterion_8},
    {9, "end-to-end determinism", criterion_9},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    else if (std::strcmp(argv[i], "--cli") == 0 && i + 1 < argc) g_cli_path = argv[++i];
    else if (std::strcmp(argv[i], "--full") == 0) g_nl = 1000;
    else {
      std::cerr << "usage: acceptance [--criterion N] [--cli PATH] [--full]\n";
      return 2;
    }
  }

  int failures = 0;
  for (const Criterion& criterion : kCriteria) {
    if (only != 0 && criterion.number != only) continue;
    Checker checker;
    auto start = std::chrono::steady_clock::now();
    criterion.run(checker);
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool ok = checker.failures == 0;
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion.number
              << " (" << criterion.name << ", " << fmt(elapsed) << " s)\n";
    for (const std::string& line : checker.details) std::cout << line << '\n';
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
