#pragma once

#include "redspace/acquisition.hpp"
#include "redspace/core.hpp"
#include "redspace/dataset.hpp"
#include "redspace/domain.hpp"
#include "redspace/gp.hpp"
#include "redspace/ppls.hpp"
#include "redspace/reduction.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace redspace {

/// A box-constrained minimisation problem: one objective and zero or more
/// constraints (feasible iff every constraint value is <= 0), evaluated
/// jointly into a vector y with y[0] = J.
class Problem {
 public:
  using ScalarFn = std::function<double(const Vector&)>;
  using VectorFn = std::function<Vector(const Vector&)>;

  Problem(DesignDomain domain, ScalarFn objective,
          std::vector<ScalarFn> constraints = {},
          std::optional<double> known_optimum = std::nullopt);

  /// For evaluators that produce all outputs in one call (e.g. a subprocess).
  static Problem from_vector_evaluator(DesignDomain domain, Index output_dim,
                                       VectorFn evaluator,
                                       std::optional<double> known_optimum = std::nullopt);

  Vector evaluate(const Vector& s) const;

  const DesignDomain& domain() const { return domain_; }
  Index design_dim() const { return domain_.dim(); }
  Index output_dim() const { return output_dim_; }
  std::optional<double> known_optimum() const { return known_optimum_; }

 private:
  Problem(DesignDomain domain, Index output_dim, VectorFn evaluator,
          std::optional<double> known_optimum);

  DesignDomain domain_;
  Index output_dim_;
  VectorFn evaluator_;
  std::optional<double> known_optimum_;
};

enum class Method { kBo, kPcaBo, kPlsBo, kPplsBo };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct DoeSpec {
  enum class Kind { kPlackettBurman, kLatinHypercube };
  Kind kind = Kind::kPlackettBurman;
  Index lhs_n = 0;      // sample count for LHS initialisation
  Index extra_lhs = 3;  // space-filling points appended after a PBD
};

struct RunConfig {
  Method method = Method::kPplsBo;
  Index d_z = 2;
  Index n_k = 100;  // adaptive sampling budget
  Index n_t = 100;  // EM budget
  Index n_l = 1000; // MC sampling budget
  AcquisitionConfig acquisition;
  uint64_t seed = 0;
  DoeSpec init;
  Index acq_budget = 768;  // maximiser evaluations per iteration
  int gp_restarts = 3;
  bool ppls_warm_start = true;
  KernelConvention kernel_convention = KernelConvention::kLinearLengthscale;
};

struct TraceRow {
  Index k;  // 0 for initial DOE rows, 1..n_k for adaptive proposals
  Vector s;
  Vector y;
  bool feasible;
  double incumbent;
};

struct IterationDigest {
  Index k = 0;
  std::optional<double> elbo;          // PPLS fit evidence bound
  std::vector<Vector> gp_log_params;   // per output
  Matrix basis;                        // W for subspace methods
};

struct Trace {
  std::string method;
  uint64_t seed = 0;
  std::vector<TraceRow> rows;
  std::vector<IterationDigest> digests;
  std::optional<std::string> error;  // set when the run aborted early
};

struct Incumbent {
  double value;
  Vector s;
  Index k;
  bool feasible;
};

/// Minimum objective among feasible rows; falls back to the overall minimum
/// (flagged infeasible) when nothing is feasible.
Incumbent best_feasible(const Trace& trace);

struct MarginalPrediction {
  double mean;
  double stddev;
};

/// MC-marginalised GP predictive: training latents are redrawn per sample
/// from their posteriors and the test latent from N(z_bar, Sigma_z); the
/// resulting mean/stddev combine by the laws of total expectation/variance.
/// Draws are frozen at construction so the surface is deterministic across
/// candidate points (common random numbers).
class MarginalPredictor {
 public:
  /// `gps` hold the per-output hyperparameters (fitted on the posterior-mean
  /// latents); each draw rebuilds their caches at resampled inputs.
  MarginalPredictor(const std::vector<GpModel>& gps, const Matrix& posterior_means,
                    const Matrix& posterior_cov, Index n_l, uint64_t seed);

  std::vector<MarginalPrediction> predict(const Vector& z_bar_star) const;

  Index draws() const { return static_cast<Index>(test_offsets_.size()); }

 private:
  std::vector<std::vector<GpModel>> per_draw_;  // [draw][output]
  std::vector<Vector> test_offsets_;            // frozen sqrt(Sigma_z) * eps
};

/// One-shot form of the predictor for a single query point.
std::vector<MarginalPrediction> marginal_predictive(const std::vector<GpModel>& gps,
                                                    const PplsModel& model,
                                                    const Dataset& data,
                                                    const Vector& z_bar_star, Index n_l,
                                                    uint64_t seed);

Trace run_bo(const Problem& problem, const RunConfig& config);
Trace run_pca_bo(const Problem& problem, const RunConfig& config);
Trace run_pls_bo(const Problem& problem, const RunConfig& config);
Trace run_ppls_bo(const Problem& problem, const RunConfig& config);

/// Dispatch on config.method.
Trace run_method(const Problem& problem, const RunConfig& config);

}  // namespace redspace
