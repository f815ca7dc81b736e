#include "redspace/benchmarks.hpp"
#include "redspace/experiment.hpp"
#include "redspace/trace_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>

namespace {

int cmd_run(const std::string& config_path, const std::string& out_override,
            long long parallelism_override) {
  redspace::ExperimentConfig config = redspace::parse_config(config_path);
  if (!out_override.empty()) config.out_dir = out_override;
  if (parallelism_override > 0)
    config.parallelism = static_cast<redspace::Index>(parallelism_override);

  redspace::ExperimentResult result = redspace::run_experiment(config);
  for (const redspace::RunOutcome& run : result.runs) {
    std::cout << redspace::method_name(run.method) << " seed " << run.seed << ": "
              << (run.ok ? "ok" : "FAILED") << " (" << run.wall_time_s << " s)";
    if (!run.error.empty()) std::cout << " - " << run.error;
    std::cout << '\n';
  }
  std::cout << "results written to " << result.out_dir << '\n';
  return result.failures == 0 ? 0 : 1;
}

int cmd_summarize(const std::string& dir) {
  std::cout << redspace::summarize_directory(dir);
  return 0;
}

int cmd_list_benchmarks() {
  for (const redspace::BenchmarkSpec& spec : redspace::benchmark_registry()) {
    std::cout << spec.name << "  d_s=" << spec.problem.design_dim()
              << " d_y=" << spec.problem.output_dim()
              << " target=" << spec.targets.target;
    if (spec.constraint_omitted) std::cout << "  [" << spec.note << "]";
    std::cout << '\n';
  }
  return 0;
}

// Line-protocol evaluator for a registered benchmark: reads {"s": [..]} per
// line on stdin, writes {"y": [..]} per line on stdout. Lets the subprocess
// evaluator path be exercised against the in-process problems.
int cmd_evaluate(const std::string& benchmark) {
  const redspace::BenchmarkSpec& spec = redspace::find_benchmark(benchmark);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    nlohmann::json req = nlohmann::json::parse(line);
    std::vector<double> sv = req.at("s").get<std::vector<double>>();
    redspace::Vector s =
        Eigen::Map<const redspace::Vector>(sv.data(), static_cast<redspace::Index>(sv.size()));
    redspace::Vector y = spec.problem.evaluate(s);
    nlohmann::json res;
    res["y"] = std::vector<double>(y.begin(), y.end());
    std::cout << res.dump() << std::endl;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimisation over learned input-output subspaces"};
  app.require_subcommand(1);

  std::string config_path, out_dir, results_dir, benchmark;
  long long parallelism = 0;

  CLI::App* run = app.add_subcommand("run", "Execute an experiment config");
  run->add_option("config", config_path, "experiment JSON file")->required();
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_option("--parallelism", parallelism, "worker pool size");

  CLI::App* summarize = app.add_subcommand("summarize", "Recompute a results summary");
  summarize->add_option("dir", results_dir, "results directory")->required();

  app.add_subcommand("list-benchmarks", "List registered benchmark problems");

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Run a benchmark as a line-protocol evaluator");
  evaluate->add_option("benchmark", benchmark, "benchmark name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, parallelism);
    if (summarize->parsed()) return cmd_summarize(results_dir);
    if (app.get_subcommand("list-benchmarks")->parsed()) return cmd_list_benchmarks();
    if (evaluate->parsed()) return cmd_evaluate(benchmark);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
