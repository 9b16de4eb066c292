#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "polybandit/env.hpp"
#include "polybandit/trace.hpp"

namespace polybandit {

struct EnvSpec {
  ModelKind kind = ModelKind::EV;
  int d = 8;
  int k = 1;
  int p = 2;
  std::vector<double> spectrum;  // empty: sampled
  double sigma = 1.0;
  std::vector<int> alpha_star;  // HARDCASE; empty: sampled
  // Seed of the instance; -1 ties it to the run seed.
  long long instance_seed = -1;
};

struct AlgoSpec {
  std::string id = "npm";
  double eps = 0.1;  // <= 0: tuned to the horizon
  double delta = 0.1;
  double C_n = 8.0;
  double C_m = 4.0;
  double C_L = 4.0;
  double C_S = 1.0;
  double C_n2 = 8.0;
  double C_eps = 1.0;
  double lambda_ridge = 1.0;
  double beta_scale = 1.0;
  int grid = 0;  // 0: twice the lifted dimension
  std::string tiebreak = "adversarial";
  std::string r_star_hint = "empirical";
  double r_star_value = 1.0;
  std::string scheme = "condition";  // gap-free subspace: condition | restart
  bool stop_at_eps = false;
  bool exact = false;
  long long n = -1;
  double m = -1.0;
  int L = -1;
  long long n2 = -1;
  long long eval = -1;
  int L0 = -1;
  int inner = -1;
  int H = 3;
  int n_states = 12;
  int n_actions = 8;
  int restarts = 20;
};

struct ExperimentConfig {
  EnvSpec env;
  AlgoSpec algo;
  long long T = 0;
  std::vector<std::uint64_t> seeds{1};
  std::string output;
  long long trace_stride = 1000;
  std::string metric;  // sweep metric; empty: by axis
  std::string label;   // column label in reports; empty: algorithm id
};

// Strict JSON: unknown keys and wrong types are ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

RewardModel build_model(const ExperimentConfig& cfg, std::uint64_t seed);

// Deterministic per (config, seed).  Summary numbers go to trace metadata
// (samples, samples_to_eps, regret, value_gap, ...).
RegretTrace run_experiment(const ExperimentConfig& cfg, std::uint64_t seed);

// Metric value of a finished trace; NaN when missing.
double trace_metric(const RegretTrace& trace, const std::string& metric);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
};

// Least squares on (log x, log y).
SlopeFit fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> v);

struct SweepPoint {
  double value = 0.0;
  std::vector<double> metrics;  // per seed, config order
  double median = 0.0;
};

struct SweepResult {
  std::string axis;
  std::string metric;
  std::vector<SweepPoint> points;
  SlopeFit fit;
};

// Thread cap from POLYBANDIT_THREADS (default: hardware concurrency).
int worker_threads();

// Runs tasks on a worker pool; results stay in task order.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task);

ExperimentConfig apply_axis(const ExperimentConfig& cfg, const std::string& axis, double value);

// axis d, T or H; at least three values.
SweepResult sweep(const ExperimentConfig& cfg, const std::string& axis,
                  const std::vector<double>& values);
void write_sweep_csv(std::ostream& os, const SweepResult& res);

// One column per trace (cumulative regret), union of t values, "NA" gaps.
void report(std::ostream& os, const std::vector<RegretTrace>& traces,
            const std::vector<std::string>& labels);

}  // namespace polybandit
