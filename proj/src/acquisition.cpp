#include "redspace/acquisition.hpp"

#include <algorithm>

namespace redspace {

double ei(double mu, double sigma, double y_best, double xi) {
  if (sigma < 0.0) throw std::invalid_argument("ei: sigma must be non-negative");
  const double gap = y_best - mu - xi;
  if (sigma < 1e-12) return std::max(gap, 0.0);
  const double u = gap / sigma;
  return std::max(gap * normal_cdf(u) + sigma * normal_pdf(u), 0.0);
}

double constrained_weight(const std::vector<ConstraintPrediction>& preds,
                          const std::vector<double>& rho) {
  if (preds.size() != rho.size())
    throw std::invalid_argument("constrained_weight: one rho per prediction required");
  double w = 1.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    double p_violation;
    if (preds[i].stddev < 1e-15) {
      p_violation = preds[i].mean > 0.0 ? 1.0 : 0.0;
    } else {
      p_violation = normal_sf(-preds[i].mean / preds[i].stddev);
    }
    w *= 1.0 + rho[i] * p_violation;
  }
  return w;
}

LatentBox latent_box(const Matrix& W, const DesignDomain& domain) {
  if (W.rows() != domain.dim())
    throw std::invalid_argument("latent_box: W rows must match domain dimension");
  const Index dz = W.cols();
  LatentBox box;
  box.lower.resize(dz);
  box.upper.resize(dz);
  for (Index j = 0; j < dz; ++j) {
    double lo = 0.0, hi = 0.0;
    for (Index i = 0; i < W.rows(); ++i) {
      const double w = W(i, j);
      lo += w >= 0.0 ? w * domain.lower[i] : w * domain.upper[i];
      hi += w >= 0.0 ? w * domain.upper[i] : w * domain.lower[i];
    }
    box.lower[j] = lo;
    box.upper[j] = hi;
  }
  return box;
}

bool indicator(const Matrix& W, const Vector& z_bar, const DesignDomain& domain) {
  return domain.contains(W * z_bar);
}

namespace {

struct Evaluated {
  Vector x;
  double base;
  double weight;
};

class Maximizer {
 public:
  Maximizer(const ScalarField& base, const ScalarField* weight, const LatentBox& box,
            Index budget, uint64_t seed)
      : base_(base), weight_(weight), box_(box), budget_(budget), rng_(seed) {
    if (budget < 1) throw std::invalid_argument("maximize_acquisition: budget must be >= 1");
    if (box.dim() < 1 || (box.lower.array() >= box.upper.array()).any())
      throw std::invalid_argument("maximize_acquisition: invalid box");
  }

  MaximizerResult run() {
    const Index d = box_.dim();
    const Index pop_size = std::min<Index>(64, budget_);
    const Index refine_budget = std::min<Index>(budget_ / 5, 4 * d * 8);

    std::vector<Evaluated> pop;
    pop.reserve(static_cast<size_t>(pop_size));
    for (Index i = 0; i < pop_size && used_ < budget_; ++i)
      pop.push_back(evaluate(random_point()));

    Vector sigma = 0.2 * (box_.upper - box_.lower);
    while (budget_ - used_ > refine_budget && !pop.empty()) {
      double gen_min = pop[0].base;
      for (const auto& e : pop) gen_min = std::min(gen_min, e.base);
      auto fitness = [&](const Evaluated& e) { return score(e, gen_min); };

      std::vector<Evaluated> next;
      next.reserve(pop.size());
      // Keep the generation's best.
      size_t best_i = 0;
      for (size_t i = 1; i < pop.size(); ++i)
        if (fitness(pop[i]) > fitness(pop[best_i])) best_i = i;
      next.push_back(pop[best_i]);

      while (next.size() < pop.size() && used_ < budget_ - refine_budget) {
        const Evaluated& a = tournament(pop, fitness);
        const Evaluated& b = tournament(pop, fitness);
        Vector child(d);
        for (Index k = 0; k < d; ++k) {
          child[k] = rng_.uniform() < 0.5 ? a.x[k] : b.x[k];
          child[k] += sigma[k] * rng_.normal();
          child[k] = std::clamp(child[k], box_.lower[k], box_.upper[k]);
        }
        next.push_back(evaluate(child));
      }
      pop = std::move(next);
      sigma *= 0.95;
    }

    refine();
    return finish();
  }

 private:
  Vector random_point() {
    Vector x(box_.dim());
    for (Index k = 0; k < box_.dim(); ++k)
      x[k] = rng_.uniform(box_.lower[k], box_.upper[k]);
    return x;
  }

  Evaluated evaluate(Vector x) {
    Evaluated e;
    e.x = std::move(x);
    e.base = base_(e.x);
    e.weight = weight_ != nullptr ? (*weight_)(e.x) : 1.0;
    ++used_;
    if (std::isfinite(e.base)) {
      any_finite_ = true;
      min_base_ = std::min(min_base_, e.base);
    }
    archive_.push_back(e);
    return e;
  }

  double score(const Evaluated& e, double shift) const {
    if (!std::isfinite(e.base)) return -std::numeric_limits<double>::infinity();
    if (weight_ == nullptr) return e.base;
    return (e.base - shift) * e.weight;
  }

  const Evaluated& tournament(const std::vector<Evaluated>& pop,
                              const std::function<double(const Evaluated&)>& fitness) {
    size_t best = static_cast<size_t>(rng_.uniform_index(static_cast<Index>(pop.size())));
    for (int t = 1; t < 3; ++t) {
      size_t c = static_cast<size_t>(rng_.uniform_index(static_cast<Index>(pop.size())));
      if (fitness(pop[c]) > fitness(pop[best])) best = c;
    }
    return pop[best];
  }

  void refine() {
    if (archive_.empty()) return;
    double shift = min_base_;
    size_t best = 0;
    for (size_t i = 1; i < archive_.size(); ++i)
      if (score(archive_[i], shift) > score(archive_[best], shift)) best = i;
    Evaluated cur = archive_[best];

    Vector step = 0.05 * (box_.upper - box_.lower);
    while (used_ < budget_ && step.maxCoeff() > 1e-12 * (box_.upper - box_.lower).maxCoeff()) {
      bool improved = false;
      for (Index k = 0; k < box_.dim() && used_ < budget_; ++k) {
        for (double dir : {+1.0, -1.0}) {
          if (used_ >= budget_) break;
          Vector cand = cur.x;
          cand[k] = std::clamp(cand[k] + dir * step[k], box_.lower[k], box_.upper[k]);
          if ((cand - cur.x).lpNorm<Eigen::Infinity>() == 0.0) continue;
          Evaluated e = evaluate(cand);
          if (score(e, min_base_) > score(cur, min_base_)) {
            cur = e;
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
  }

  MaximizerResult finish() const {
    if (!any_finite_)
      throw std::runtime_error("maximize_acquisition: objective non-finite at all probes");
    double shift = min_base_;
    size_t best = 0;
    for (size_t i = 1; i < archive_.size(); ++i)
      if (score(archive_[i], shift) > score(archive_[best], shift)) best = i;
    return MaximizerResult{archive_[best].x, archive_[best].base};
  }

  const ScalarField& base_;
  const ScalarField* weight_;
  LatentBox box_;
  Index budget_;
  Rng rng_;
  Index used_ = 0;
  bool any_finite_ = false;
  double min_base_ = std::numeric_limits<double>::infinity();
  std::vector<Evaluated> archive_;
};

}  // namespace

MaximizerResult maximize_acquisition(const ScalarField& objective, const LatentBox& box,
                                     Index budget, uint64_t seed) {
  return Maximizer(objective, nullptr, box, budget, seed).run();
}

MaximizerResult maximize_acquisition_weighted(const ScalarField& base,
                                              const ScalarField& weight,
                                              const LatentBox& box, Index budget,
                                              uint64_t seed) {
  return Maximizer(base, &weight, box, budget, seed).run();
}

}  // namespace redspace
