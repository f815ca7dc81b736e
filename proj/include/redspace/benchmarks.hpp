#pragma once

#include "redspace/core.hpp"
#include "redspace/optimizer.hpp"

#include <string>
#include <vector>

namespace redspace {

/// Multi-modal 20-variable objective on [0,1]^20 with intrinsic dimension 2.
double illustrative_objective(const Vector& s);

/// Affine constraint paired with the objective above; feasible iff <= 0.
double illustrative_constraint(const Vector& s);

enum class CantileverVariant { kStep, kPeriodic };

/// Five-variable cantilever cost: volume-proportional base plus a step or
/// periodic per-segment contribution.
double cantilever_objective(const Vector& s, CantileverVariant variant);

struct ReferenceTargets {
  double reported_optimum;
  double target;  // convergence threshold used by summaries
  Vector reported_optimizer;
};

struct BenchmarkSpec {
  std::string name;
  Problem problem;
  ReferenceTargets targets;
  bool constraint_omitted = false;
  std::string note;
};

const std::vector<BenchmarkSpec>& benchmark_registry();

const BenchmarkSpec& find_benchmark(const std::string& name);

}  // namespace redspace
