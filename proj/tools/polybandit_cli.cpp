#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "polybandit/env.hpp"
#include "polybandit/harness.hpp"
#include "polybandit/noiseless.hpp"
#include "polybandit/trace.hpp"
#include "polybandit/version.hpp"

using namespace polybandit;

namespace {

int run_cmd(const std::string& config, std::uint64_t seed, const std::string& output) {
  const ExperimentConfig cfg = load_config(config);
  const RegretTrace tr = run_experiment(cfg, seed);
  const std::string path = !output.empty() ? output : cfg.output;
  if (path.empty()) {
    write_trace_csv(std::cout, tr);
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    write_trace_csv(out, tr);
  }
  return 0;
}

int sweep_cmd(const std::string& config, const std::string& axis,
              const std::vector<double>& values, const std::string& output) {
  const ExperimentConfig cfg = load_config(config);
  const SweepResult res = sweep(cfg, axis, values);
  if (output.empty()) {
    write_sweep_csv(std::cout, res);
  } else {
    std::ofstream out(output, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + output);
    write_sweep_csv(out, res);
  }
  return 0;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

int hardcase_cmd(int d, int p, const std::string& tiebreak, int seeds, std::uint64_t first) {
  const TieBreak tie = parse_tie_break(tiebreak);
  if (seeds < 1) throw ConfigError("--seeds must be positive");
  ExperimentConfig cfg;
  cfg.env.kind = ModelKind::HARDCASE;
  cfg.env.d = d;
  cfg.env.k = 1;
  cfg.env.p = p;
  cfg.env.sigma = 0.0;
  cfg.algo.id = "hardcase_random";
  cfg.T = 0;
  validate_config(cfg);
  std::cout << "seed,alpha_star,ucb_plays,random_plays,all_vertices,certificate_ok\r\n";
  for (int i = 0; i < seeds; ++i) {
    const std::uint64_t seed = first + static_cast<std::uint64_t>(i);
    const RewardModel m = build_model(cfg, seed);
    const HardCaseRun ucb = ucb_hard_case_run(d, p, m.alpha_star, tie,
                                              Stream::derive(seed, StreamTag::Noiseless, 10));
    const RegretTrace rnd = run_experiment(cfg, seed);
    std::cout << seed << "," << csv_field(join(m.alpha_star)) << "," << ucb.plays << ","
              << rnd.get_meta("plays") << "," << (ucb.all_vertices ? 1 : 0) << ","
              << (ucb.certificate_ok ? 1 : 0) << "\r\n";
  }
  return 0;
}

int report_cmd(const std::vector<std::string>& files, const std::string& output) {
  std::vector<RegretTrace> traces;
  std::vector<std::string> labels;
  for (const std::string& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw ConfigError("cannot read trace " + f);
    traces.push_back(read_trace_csv(in));
    std::string label = traces.back().get_meta("algorithm");
    if (label.empty()) label = std::filesystem::path(f).stem().string();
    labels.push_back(label);
  }
  if (output.empty()) {
    report(std::cout, traces, labels);
  } else {
    std::ofstream out(output, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + output);
    report(out, traces, labels);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial bandit experiments"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config, output, axis, tiebreak = "adversarial";
  std::uint64_t seed = 1;
  std::vector<double> values;
  std::vector<std::string> files;
  int d = 12, p = 3, seeds = 1;

  auto* run = app.add_subcommand("run", "Run one seeded experiment and write its trace");
  run->add_option("--config", config, "JSON config file")->required();
  run->add_option("--seed", seed, "Run seed");
  run->add_option("-o,--output", output, "Trace CSV path (default: config output or stdout)");

  auto* sw = app.add_subcommand("sweep", "Median metric over a grid and log-log slope");
  sw->add_option("--config", config, "JSON config file")->required();
  sw->add_option("--axis", axis, "d, T or H")->required()->check(CLI::IsMember({"d", "T", "H"}));
  sw->add_option("--values", values, "Axis values (at least three)")->required();
  sw->add_option("-o,--output", output, "Summary CSV path (default: stdout)");

  auto* hc = app.add_subcommand("hardcase", "Optimistic vs random play on the hard instance");
  hc->add_option("--d", d, "Dimension")->required();
  hc->add_option("--p", p, "Degree")->required();
  hc->add_option("--tiebreak", tiebreak, "adversarial, lex or uniform");
  hc->add_option("--seeds", seeds, "Number of seeds");
  hc->add_option("--seed", seed, "First seed");

  auto* rep = app.add_subcommand("report", "Merge traces into one comparison CSV");
  rep->add_option("traces", files, "Trace CSV files")->required();
  rep->add_option("-o,--output", output, "Output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return run_cmd(config, seed, output);
    if (*sw) return sweep_cmd(config, axis, values, output);
    if (*hc) return hardcase_cmd(d, p, tiebreak, seeds, seed);
    if (*rep) return report_cmd(files, output);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "algorithm failure: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
