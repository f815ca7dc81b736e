#pragma once

#include "redspace/core.hpp"
#include "redspace/domain.hpp"

#include <functional>
#include <vector>

namespace redspace {

enum class AcquisitionKind { kUcb, kEi };

struct GammaSchedule {
  bool adaptive = true;
  double constant = 1.0;

  double at(Index k, Index d_z) const {
    return adaptive ? adaptive_gamma(k, d_z) : constant;
  }

  /// 0.2 * d_z * ln(2(k+1)) with k the 0-based adaptive sampling iteration.
  static double adaptive_gamma(Index k, Index d_z) {
    return 0.2 * static_cast<double>(d_z) * std::log(2.0 * static_cast<double>(k + 1));
  }
};

struct AcquisitionConfig {
  AcquisitionKind kind = AcquisitionKind::kEi;
  GammaSchedule gamma;
  double xi = 0.0;
  double rho = -1.0;  // per-constraint penalty, in [-1, 0]
};

/// Upper confidence bound -mu + gamma * sigma.
inline double ucb(double mu, double sigma, double gamma) {
  return -mu + gamma * sigma;
}

/// Expected improvement (y+ - mu - xi) Phi(u) + sigma phi(u); degenerates to
/// max(y+ - mu - xi, 0) as sigma -> 0. Never negative.
double ei(double mu, double sigma, double y_best, double xi);

struct ConstraintPrediction {
  double mean;
  double stddev;
};

/// prod_i (1 + rho_i * P(f_i > 0)) over constraint predictions; with
/// rho = -1 this is the product of feasibility probabilities.
double constrained_weight(const std::vector<ConstraintPrediction>& preds,
                          const std::vector<double>& rho);

/// Minimum bounding box of {W^T s | s a vertex of the domain}. Each latent
/// coordinate's extremes over the vertex set are separable across design
/// coordinates, so the box is computed exactly in closed form.
LatentBox latent_box(const Matrix& W, const DesignDomain& domain);

/// 1 iff W z_bar lies inside the domain (inclusive bounds).
bool indicator(const Matrix& W, const Vector& z_bar, const DesignDomain& domain);

using ScalarField = std::function<double(const Vector&)>;

struct MaximizerResult {
  Vector x;
  double value = 0.0;
};

/// Seeded global maximisation over a box: tournament-selection GA with
/// Gaussian mutation followed by coordinate refinement of the best
/// individual. `budget` counts objective evaluations.
MaximizerResult maximize_acquisition(const ScalarField& objective, const LatentBox& box,
                                     Index budget, uint64_t seed);

/// Variant for acquisitions that may be negative: candidates are scored by
/// (base - min base) * weight, with the shift taken per GA generation, so a
/// multiplicative weight in [0, 1] cannot reward infeasibility. The final
/// result maximises the shift-consistent score over all evaluated points.
MaximizerResult maximize_acquisition_weighted(const ScalarField& base,
                                              const ScalarField& weight,
                                              const LatentBox& box, Index budget,
                                              uint64_t seed);

}  // namespace redspace
