#pragma once

#include "redspace/optimizer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace redspace {

struct EvaluatorSpec {
  std::vector<std::string> command;  // argv of the evaluator executable
  Index output_dim = 1;
  std::optional<DesignDomain> domain;
  int timeout_ms = 60000;
  std::optional<double> known_optimum;
};

/// Wrap an external executable as a Problem. Protocol: one JSON object per
/// line on the child's stdin {"s": [..]}, one per line on its stdout
/// {"y": [..]} (UTF-8). The child is spawned lazily on first evaluation and
/// kept alive for the run; spawn failure, timeout, non-finite outputs, and
/// malformed lines raise evaluation errors.
Problem external_evaluator(const EvaluatorSpec& spec);

}  // namespace redspace
