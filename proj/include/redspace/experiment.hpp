#pragma once

#include "redspace/evaluator.hpp"
#include "redspace/optimizer.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace redspace {

struct ExperimentConfig {
  std::string benchmark;                    // registry name, empty when external
  std::optional<EvaluatorSpec> evaluator;   // external problem spec
  std::vector<Method> methods;
  std::vector<uint64_t> seeds;
  std::string out_dir = "results";
  Index parallelism = 0;  // 0 = hardware concurrency
  std::map<Method, RunConfig> run_configs;  // defaults + per-method overrides
  double target = std::numeric_limits<double>::quiet_NaN();  // convergence target
};

/// Parse and validate a JSON experiment file; unknown keys and invalid ranges
/// are rejected with a diagnostic naming the offending key. Defaults: EI with
/// xi = 0, rho = -1, n_l = 1000, n_t = 100, PBD init with 3 extra LHS points.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

/// Canonical JSON (defaults filled, sorted keys) and its FNV-1a hash; the
/// hash changes iff a semantically meaningful field changes.
std::string canonical_config_json(const ExperimentConfig& config);
uint64_t config_hash(const ExperimentConfig& config);

/// Smallest adaptive iteration k whose feasible observation is below the
/// target (0 when the initial DOE already gets there); nullopt = not reached.
std::optional<Index> iterations_to_target(const Trace& trace, double target);

struct ConvergenceSummary {
  struct IncumbentStat {
    std::string method;
    Index k;
    double mean;
    double stddev;
    Index count;
  };
  struct TargetStat {
    std::string method;
    double mean;    // unreached runs censored at their adaptive budget
    double stddev;
    Index reached;
    Index total;
  };
  std::vector<IncumbentStat> incumbents;
  std::vector<TargetStat> to_target;
};

ConvergenceSummary summarize_traces(const std::vector<Trace>& traces, double target);
std::string summary_to_csv(const ConvergenceSummary& summary);

struct RunOutcome {
  Method method;
  uint64_t seed = 0;            // configured seed
  uint64_t effective_seed = 0;  // after REDSPACE_SEED_OFFSET
  std::string trace_file;
  bool ok = false;
  std::string error;
  double wall_time_s = 0.0;
};

struct ExperimentResult {
  std::string out_dir;
  std::vector<RunOutcome> runs;
  Index failures = 0;
};

/// Execute every (method, seed) pair on a bounded worker pool, writing one
/// trace CSV per run plus manifest.json and summary.csv.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Recompute summary.csv from the trace files persisted in a results
/// directory; returns the CSV text.
std::string summarize_directory(const std::string& dir);

/// REDSPACE_SEED_OFFSET (integer, default 0).
int64_t seed_offset_from_env();

}  // namespace redspace
