#include "redspace/experiment.hpp"

#include "redspace/benchmarks.hpp"
#include "redspace/trace_io.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

namespace redspace {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& message) {
  throw std::invalid_argument("config: " + message);
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (allowed.find(it.key()) == allowed.end())
      config_error("unknown key '" + it.key() + "' in " + where);
}

AcquisitionConfig parse_acquisition(const json& obj) {
  reject_unknown_keys(obj, {"kind", "gamma", "xi", "rho"}, "acquisition");
  AcquisitionConfig acq;
  if (obj.contains("kind")) {
    std::string kind = obj["kind"].get<std::string>();
    if (kind == "ei") acq.kind = AcquisitionKind::kEi;
    else if (kind == "ucb") acq.kind = AcquisitionKind::kUcb;
    else config_error("acquisition.kind must be 'ei' or 'ucb'");
  }
  if (obj.contains("gamma")) {
    if (obj["gamma"].is_string()) {
      if (obj["gamma"].get<std::string>() != "adaptive")
        config_error("acquisition.gamma must be a number or 'adaptive'");
      acq.gamma.adaptive = true;
    } else {
      acq.gamma.adaptive = false;
      acq.gamma.constant = obj["gamma"].get<double>();
      if (acq.gamma.constant < 0.0) config_error("acquisition.gamma must be >= 0");
    }
  }
  if (obj.contains("xi")) acq.xi = obj["xi"].get<double>();
  if (obj.contains("rho")) {
    acq.rho = obj["rho"].get<double>();
    if (acq.rho < -1.0 || acq.rho > 0.0) config_error("acquisition.rho must lie in [-1, 0]");
  }
  return acq;
}

DoeSpec parse_init(const json& obj) {
  reject_unknown_keys(obj, {"kind", "n", "extra_lhs"}, "init");
  DoeSpec spec;
  if (obj.contains("kind")) {
    std::string kind = obj["kind"].get<std::string>();
    if (kind == "pbd") spec.kind = DoeSpec::Kind::kPlackettBurman;
    else if (kind == "lhs") spec.kind = DoeSpec::Kind::kLatinHypercube;
    else config_error("init.kind must be 'pbd' or 'lhs'");
  }
  if (obj.contains("n")) spec.lhs_n = obj["n"].get<Index>();
  if (obj.contains("extra_lhs")) {
    spec.extra_lhs = obj["extra_lhs"].get<Index>();
    if (spec.extra_lhs < 0) config_error("init.extra_lhs must be >= 0");
  }
  return spec;
}

void apply_run_config_keys(RunConfig& cfg, const json& obj, const std::string& where) {
  reject_unknown_keys(obj,
                      {"d_z", "n_k", "n_t", "n_l", "acquisition", "init", "acq_budget",
                       "gp_restarts", "ppls_warm_start", "kernel_convention"},
                      where);
  if (obj.contains("d_z")) cfg.d_z = obj["d_z"].get<Index>();
  if (obj.contains("n_k")) cfg.n_k = obj["n_k"].get<Index>();
  if (obj.contains("n_t")) cfg.n_t = obj["n_t"].get<Index>();
  if (obj.contains("n_l")) cfg.n_l = obj["n_l"].get<Index>();
  if (obj.contains("acquisition")) cfg.acquisition = parse_acquisition(obj["acquisition"]);
  if (obj.contains("init")) cfg.init = parse_init(obj["init"]);
  if (obj.contains("acq_budget")) cfg.acq_budget = obj["acq_budget"].get<Index>();
  if (obj.contains("gp_restarts")) cfg.gp_restarts = obj["gp_restarts"].get<int>();
  if (obj.contains("ppls_warm_start")) cfg.ppls_warm_start = obj["ppls_warm_start"].get<bool>();
  if (obj.contains("kernel_convention")) {
    std::string conv = obj["kernel_convention"].get<std::string>();
    if (conv == "paper") cfg.kernel_convention = KernelConvention::kLinearLengthscale;
    else if (conv == "squared") cfg.kernel_convention = KernelConvention::kSquaredLengthscale;
    else config_error("kernel_convention must be 'paper' or 'squared'");
  }
  if (cfg.d_z < 1) config_error(where + ".d_z must be >= 1");
  if (cfg.n_k < 0) config_error(where + ".n_k must be >= 0");
  if (cfg.n_t < 0) config_error(where + ".n_t must be >= 0");
  if (cfg.n_l < 2) config_error(where + ".n_l must be >= 2");
  if (cfg.acq_budget < 1) config_error(where + ".acq_budget must be >= 1");
  if (cfg.gp_restarts < 1) config_error(where + ".gp_restarts must be >= 1");
}

DesignDomain parse_domain(const json& obj) {
  reject_unknown_keys(obj, {"lower", "upper"}, "evaluator.domain");
  if (!obj.contains("lower") || !obj.contains("upper"))
    config_error("evaluator.domain needs 'lower' and 'upper'");
  std::vector<double> lo = obj["lower"].get<std::vector<double>>();
  std::vector<double> hi = obj["upper"].get<std::vector<double>>();
  if (lo.size() != hi.size() || lo.empty())
    config_error("evaluator.domain bounds must be non-empty and equal-sized");
  return DesignDomain(Eigen::Map<const Vector>(lo.data(), static_cast<Index>(lo.size())),
                      Eigen::Map<const Vector>(hi.data(), static_cast<Index>(hi.size())));
}

EvaluatorSpec parse_evaluator(const json& obj) {
  reject_unknown_keys(obj, {"command", "d_y", "domain", "timeout_ms", "target"},
                      "evaluator");
  EvaluatorSpec spec;
  if (!obj.contains("command") || !obj["command"].is_array() || obj["command"].empty())
    config_error("evaluator.command must be a non-empty array");
  spec.command = obj["command"].get<std::vector<std::string>>();
  if (!obj.contains("d_y")) config_error("evaluator.d_y is required");
  spec.output_dim = obj["d_y"].get<Index>();
  if (spec.output_dim < 1) config_error("evaluator.d_y must be >= 1");
  if (!obj.contains("domain")) config_error("evaluator.domain is required");
  spec.domain = parse_domain(obj["domain"]);
  if (obj.contains("timeout_ms")) {
    spec.timeout_ms = obj["timeout_ms"].get<int>();
    if (spec.timeout_ms < 1) config_error("evaluator.timeout_ms must be >= 1");
  }
  return spec;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const std::exception& err) {
    config_error(std::string("invalid JSON: ") + err.what());
  }
  if (!root.is_object()) config_error("top level must be a JSON object");
  reject_unknown_keys(root,
                      {"benchmark", "evaluator", "method", "methods", "seeds", "out",
                       "parallelism", "defaults", "per_method", "target"},
                      "top level");

  ExperimentConfig config;
  if (root.contains("benchmark") == root.contains("evaluator"))
    config_error("exactly one of 'benchmark' or 'evaluator' is required");
  if (root.contains("benchmark")) {
    config.benchmark = root["benchmark"].get<std::string>();
    find_benchmark(config.benchmark);  // throws on unknown name
  } else {
    config.evaluator = parse_evaluator(root["evaluator"]);
    if (root["evaluator"].contains("target"))
      config.target = root["evaluator"]["target"].get<double>();
  }

  if (root.contains("method") && root.contains("methods"))
    config_error("use either 'method' or 'methods', not both");
  std::vector<std::string> method_names;
  if (root.contains("method")) {
    method_names.push_back(root["method"].get<std::string>());
  } else if (root.contains("methods")) {
    method_names = root["methods"].get<std::vector<std::string>>();
  } else {
    config_error("'method' or 'methods' is required");
  }
  if (method_names.empty()) config_error("'methods' must be non-empty");
  for (const std::string& name : method_names)
    config.methods.push_back(method_from_name(name));

  if (!root.contains("seeds")) config_error("'seeds' is required");
  std::vector<int64_t> seeds = root["seeds"].get<std::vector<int64_t>>();
  if (seeds.empty()) config_error("'seeds' must be non-empty");
  std::set<int64_t> distinct(seeds.begin(), seeds.end());
  if (distinct.size() != seeds.size()) config_error("'seeds' must be distinct");
  for (int64_t s : seeds) {
    if (s < 0) config_error("'seeds' must be non-negative");
    config.seeds.push_back(static_cast<uint64_t>(s));
  }

  if (root.contains("out")) config.out_dir = root["out"].get<std::string>();
  if (root.contains("parallelism")) {
    config.parallelism = root["parallelism"].get<Index>();
    if (config.parallelism < 0) config_error("'parallelism' must be >= 0");
  }

  RunConfig defaults;
  if (root.contains("defaults")) apply_run_config_keys(defaults, root["defaults"], "defaults");
  for (Method m : config.methods) config.run_configs[m] = defaults;
  if (root.contains("per_method")) {
    if (!root["per_method"].is_object()) config_error("'per_method' must be an object");
    for (auto it = root["per_method"].begin(); it != root["per_method"].end(); ++it) {
      Method m = method_from_name(it.key());
      if (config.run_configs.find(m) == config.run_configs.end())
        config_error("per_method entry '" + it.key() + "' is not in 'methods'");
      apply_run_config_keys(config.run_configs[m], it.value(), "per_method." + it.key());
    }
  }
  for (auto& [m, cfg] : config.run_configs) cfg.method = m;

  if (root.contains("target")) config.target = root["target"].get<double>();
  if (!root.contains("target") && !config.benchmark.empty())
    config.target = find_benchmark(config.benchmark).targets.target;

  // d_z cannot exceed the design dimension.
  Index d_s = config.evaluator.has_value() ? config.evaluator->domain->dim()
                                           : find_benchmark(config.benchmark)
                                                 .problem.design_dim();
  for (const auto& [m, cfg] : config.run_configs)
    if (cfg.d_z > d_s)
      config_error("d_z = " + std::to_string(cfg.d_z) + " exceeds d_s = " +
                   std::to_string(d_s) + " for method '" + method_name(m) + "'");

  return config;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

namespace {

json run_config_to_json(const RunConfig& cfg) {
  json acq;
  acq["kind"] = cfg.acquisition.kind == AcquisitionKind::kEi ? "ei" : "ucb";
  if (cfg.acquisition.gamma.adaptive) acq["gamma"] = "adaptive";
  else acq["gamma"] = cfg.acquisition.gamma.constant;
  acq["xi"] = cfg.acquisition.xi;
  acq["rho"] = cfg.acquisition.rho;
  json init;
  init["kind"] = cfg.init.kind == DoeSpec::Kind::kPlackettBurman ? "pbd" : "lhs";
  init["n"] = cfg.init.lhs_n;
  init["extra_lhs"] = cfg.init.extra_lhs;
  json j;
  j["d_z"] = cfg.d_z;
  j["n_k"] = cfg.n_k;
  j["n_t"] = cfg.n_t;
  j["n_l"] = cfg.n_l;
  j["acquisition"] = std::move(acq);
  j["init"] = std::move(init);
  j["acq_budget"] = cfg.acq_budget;
  j["gp_restarts"] = cfg.gp_restarts;
  j["ppls_warm_start"] = cfg.ppls_warm_start;
  j["kernel_convention"] =
      cfg.kernel_convention == KernelConvention::kLinearLengthscale ? "paper" : "squared";
  return j;
}

}  // namespace

std::string canonical_config_json(const ExperimentConfig& config) {
  json j;
  if (config.evaluator.has_value()) {
    json e;
    e["command"] = config.evaluator->command;
    e["d_y"] = config.evaluator->output_dim;
    e["domain"]["lower"] = std::vector<double>(config.evaluator->domain->lower.begin(),
                                               config.evaluator->domain->lower.end());
    e["domain"]["upper"] = std::vector<double>(config.evaluator->domain->upper.begin(),
                                               config.evaluator->domain->upper.end());
    e["timeout_ms"] = config.evaluator->timeout_ms;
    j["evaluator"] = std::move(e);
  } else {
    j["benchmark"] = config.benchmark;
  }
  json methods = json::array();
  for (Method m : config.methods) methods.push_back(method_name(m));
  j["methods"] = std::move(methods);
  j["seeds"] = config.seeds;
  json per_method;
  for (const auto& [m, cfg] : config.run_configs)
    per_method[method_name(m)] = run_config_to_json(cfg);
  j["per_method"] = std::move(per_method);
  if (std::isfinite(config.target)) j["target"] = config.target;
  // out_dir and parallelism do not affect run content.
  return j.dump();  // nlohmann objects serialise with sorted keys
}

uint64_t config_hash(const ExperimentConfig& config) {
  std::string text = canonical_config_json(config);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::optional<Index> iterations_to_target(const Trace& trace, double target) {
  if (!std::isfinite(target))
    throw std::invalid_argument("iterations_to_target: target must be finite");
  std::optional<Index> best;
  for (const TraceRow& row : trace.rows) {
    if (!row.feasible || row.y[0] >= target) continue;
    if (!best.has_value() || row.k < *best) best = row.k;
  }
  return best;
}

ConvergenceSummary summarize_traces(const std::vector<Trace>& traces, double target) {
  ConvergenceSummary summary;
  // Group by method, preserving first-appearance order.
  std::vector<std::string> methods;
  for (const Trace& t : traces)
    if (std::find(methods.begin(), methods.end(), t.method) == methods.end())
      methods.push_back(t.method);

  for (const std::string& method : methods) {
    std::vector<const Trace*> group;
    for (const Trace& t : traces)
      if (t.method == method) group.push_back(&t);

    Index max_k = 0;
    for (const Trace* t : group)
      for (const TraceRow& row : t->rows) max_k = std::max(max_k, row.k);

    // Incumbent after all rows with row.k <= k, per run.
    std::vector<std::vector<double>> curves;
    for (const Trace* t : group) {
      std::vector<double> curve(static_cast<size_t>(max_k) + 1,
                                std::numeric_limits<double>::quiet_NaN());
      for (const TraceRow& row : t->rows)
        curve[static_cast<size_t>(row.k)] = row.incumbent;
      for (size_t k = 1; k < curve.size(); ++k)
        if (std::isnan(curve[k])) curve[k] = curve[k - 1];
      curves.push_back(std::move(curve));
    }
    for (Index k = 0; k <= max_k; ++k) {
      double sum = 0.0;
      Index count = 0;
      for (const auto& curve : curves) {
        double v = curve[static_cast<size_t>(k)];
        if (!std::isnan(v)) {
          sum += v;
          ++count;
        }
      }
      double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
      double ss = 0.0;
      for (const auto& curve : curves) {
        double v = curve[static_cast<size_t>(k)];
        if (!std::isnan(v)) ss += (v - mean) * (v - mean);
      }
      double sd = count > 1 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
      summary.incumbents.push_back(
          ConvergenceSummary::IncumbentStat{method, k, mean, sd, count});
    }

    if (std::isfinite(target)) {
      std::vector<double> iters;
      Index reached = 0;
      for (const Trace* t : group) {
        std::optional<Index> it = iterations_to_target(*t, target);
        if (it.has_value()) {
          iters.push_back(static_cast<double>(*it));
          ++reached;
        } else {
          iters.push_back(static_cast<double>(max_k));  // censored at the budget
        }
      }
      double mean = 0.0;
      for (double v : iters) mean += v;
      mean /= static_cast<double>(iters.size());
      double ss = 0.0;
      for (double v : iters) ss += (v - mean) * (v - mean);
      double sd = iters.size() > 1 ? std::sqrt(ss / static_cast<double>(iters.size() - 1)) : 0.0;
      summary.to_target.push_back(ConvergenceSummary::TargetStat{
          method, mean, sd, reached, static_cast<Index>(group.size())});
    }
  }
  return summary;
}

std::string summary_to_csv(const ConvergenceSummary& summary) {
  std::string out = "record,method,k,mean,std,count,reached\n";
  for (const auto& s : summary.incumbents) {
    out += "incumbent," + s.method + ',' + std::to_string(s.k) + ',' +
           format_double(s.mean) + ',' + format_double(s.stddev) + ',' +
           std::to_string(s.count) + ",\n";
  }
  for (const auto& s : summary.to_target) {
    out += "iterations_to_target," + s.method + ",," + format_double(s.mean) + ',' +
           format_double(s.stddev) + ',' + std::to_string(s.total) + ',' +
           std::to_string(s.reached) + '\n';
  }
  return out;
}

int64_t seed_offset_from_env() {
  const char* raw = std::getenv("REDSPACE_SEED_OFFSET");
  if (raw == nullptr || *raw == '\0') return 0;
  char* end = nullptr;
  long long value = std::strtoll(raw, &end, 10);
  if (end == raw || *end != '\0')
    throw std::invalid_argument("REDSPACE_SEED_OFFSET must be an integer");
  return value;
}

namespace {

std::string trace_filename(Method method, uint64_t seed) {
  return "trace_" + method_name(method) + "_seed" + std::to_string(seed) + ".csv";
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  const int64_t offset = seed_offset_from_env();
  fs::create_directories(config.out_dir);

  struct Job {
    Method method;
    uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Method m : config.methods)
    for (uint64_t s : config.seeds) jobs.push_back(Job{m, s});

  std::vector<RunOutcome> outcomes(jobs.size());
  std::vector<Trace> traces(jobs.size());

  std::mutex queue_mutex;
  size_t next_job = 0;
  auto worker = [&]() {
    while (true) {
      size_t i;
      {
        std::lock_guard<std::mutex> lock(queue_mutex);
        if (next_job >= jobs.size()) return;
        i = next_job++;
      }
      const Job& job = jobs[i];
      RunOutcome& outcome = outcomes[i];
      outcome.method = job.method;
      outcome.seed = job.seed;
      outcome.effective_seed = static_cast<uint64_t>(
          static_cast<int64_t>(job.seed) + offset);
      outcome.trace_file = trace_filename(job.method, job.seed);
      auto t0 = std::chrono::steady_clock::now();
      try {
        RunConfig run_cfg = config.run_configs.at(job.method);
        run_cfg.seed = outcome.effective_seed;
        // Each run owns its problem instance (external evaluators spawn one
        // child per run).
        Problem problem = config.evaluator.has_value()
                              ? external_evaluator(*config.evaluator)
                              : find_benchmark(config.benchmark).problem;
        Trace trace = run_method(problem, run_cfg);
        if (trace.error.has_value()) {
          outcome.ok = false;
          outcome.error = *trace.error;
        } else {
          outcome.ok = true;
        }
        traces[i] = std::move(trace);
      } catch (const std::exception& err) {
        outcome.ok = false;
        outcome.error = err.what();
      }
      outcome.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };

  Index n_workers = config.parallelism > 0
                        ? config.parallelism
                        : static_cast<Index>(std::thread::hardware_concurrency());
  n_workers = std::max<Index>(1, std::min<Index>(n_workers, static_cast<Index>(jobs.size())));
  std::vector<std::thread> pool;
  for (Index w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  ExperimentResult result;
  result.out_dir = config.out_dir;
  std::vector<Trace> completed;
  for (size_t i = 0; i < jobs.size(); ++i) {
    if (!traces[i].rows.empty())
      write_text_file(fs::path(config.out_dir) / outcomes[i].trace_file,
                      trace_to_csv(traces[i]));
    if (!outcomes[i].error.empty() || !outcomes[i].ok) ++result.failures;
    else completed.push_back(traces[i]);
    result.runs.push_back(outcomes[i]);
  }

  if (!completed.empty())
    write_text_file(fs::path(config.out_dir) / "summary.csv",
                    summary_to_csv(summarize_traces(completed, config.target)));

  json manifest;
  manifest["config"] = json::parse(canonical_config_json(config));
  manifest["config_hash"] = config_hash(config);
  manifest["version"] = "0.1.0";
  manifest["seed_offset"] = offset;
  manifest["runs"] = json::array();
  for (const RunOutcome& r : result.runs) {
    json jr;
    jr["method"] = method_name(r.method);
    jr["seed"] = r.seed;
    jr["effective_seed"] = r.effective_seed;
    jr["file"] = r.trace_file;
    jr["status"] = r.ok ? "ok" : "failed";
    if (!r.error.empty()) jr["error"] = r.error;
    jr["wall_time_s"] = r.wall_time_s;
    manifest["runs"].push_back(std::move(jr));
  }
  write_text_file(fs::path(config.out_dir) / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

std::string summarize_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  json manifest = json::parse(read_text_file(fs::path(dir) / "manifest.json"));
  double target = std::numeric_limits<double>::quiet_NaN();
  if (manifest["config"].contains("target"))
    target = manifest["config"]["target"].get<double>();

  std::vector<Trace> traces;
  for (const auto& run : manifest["runs"]) {
    if (run["status"].get<std::string>() != "ok") continue;
    traces.push_back(trace_from_csv(read_text_file(
        fs::path(dir) / run["file"].get<std::string>())));
  }
  if (traces.empty()) throw std::runtime_error("summarize: no successful runs in " + dir);
  return summary_to_csv(summarize_traces(traces, target));
}

}  // namespace redspace
