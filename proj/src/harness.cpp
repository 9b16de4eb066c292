#include "polybandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "polybandit/baselines.hpp"
#include "polybandit/linalg.hpp"
#include "polybandit/noiseless.hpp"
#include "polybandit/rl.hpp"
#include "polybandit/spectral.hpp"
#include "polybandit/tensor.hpp"
#include "polybandit/version.hpp"

namespace polybandit {

namespace {

using json = nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::set<std::string>& algorithm_ids() {
  static const std::set<std::string> ids = {
      "optimal",           "npm",          "npm_gap_free",    "subspace",
      "gap_free_subspace", "phased",       "burn_in",         "alternating",
      "lin_ucb",           "identify_commit", "hardcase_ucb", "hardcase_random",
      "rl"};
  return ids;
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  try {
    out = j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

void parse_env(const json& j, EnvSpec& e) {
  if (!j.is_object()) throw ConfigError("env must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "kind") {
      std::string s;
      read(v, "kind", s, "env");
      e.kind = parse_model_kind(s);
    } else if (k == "d") read(v, "d", e.d, "env");
    else if (k == "k") read(v, "k", e.k, "env");
    else if (k == "p") read(v, "p", e.p, "env");
    else if (k == "spectrum") read(v, "spectrum", e.spectrum, "env");
    else if (k == "sigma") read(v, "sigma", e.sigma, "env");
    else if (k == "alpha_star") read(v, "alpha_star", e.alpha_star, "env");
    else if (k == "instance_seed") read(v, "instance_seed", e.instance_seed, "env");
    else throw ConfigError("unknown key env." + k);
  }
}

void parse_algo(const json& j, AlgoSpec& a) {
  if (!j.is_object()) throw ConfigError("algorithm must be an object");
  const std::string w = "algorithm";
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "id") read(v, "id", a.id, w);
    else if (k == "eps") read(v, "eps", a.eps, w);
    else if (k == "delta") read(v, "delta", a.delta, w);
    else if (k == "C_n") read(v, "C_n", a.C_n, w);
    else if (k == "C_m") read(v, "C_m", a.C_m, w);
    else if (k == "C_L") read(v, "C_L", a.C_L, w);
    else if (k == "C_S") read(v, "C_S", a.C_S, w);
    else if (k == "C_n2") read(v, "C_n2", a.C_n2, w);
    else if (k == "C_eps") read(v, "C_eps", a.C_eps, w);
    else if (k == "lambda_ridge") read(v, "lambda_ridge", a.lambda_ridge, w);
    else if (k == "beta_scale") read(v, "beta_scale", a.beta_scale, w);
    else if (k == "grid") read(v, "grid", a.grid, w);
    else if (k == "tiebreak") read(v, "tiebreak", a.tiebreak, w);
    else if (k == "r_star_hint") read(v, "r_star_hint", a.r_star_hint, w);
    else if (k == "r_star_value") read(v, "r_star_value", a.r_star_value, w);
    else if (k == "scheme") read(v, "scheme", a.scheme, w);
    else if (k == "stop_at_eps") read(v, "stop_at_eps", a.stop_at_eps, w);
    else if (k == "exact") read(v, "exact", a.exact, w);
    else if (k == "n") read(v, "n", a.n, w);
    else if (k == "m") read(v, "m", a.m, w);
    else if (k == "L") read(v, "L", a.L, w);
    else if (k == "n2") read(v, "n2", a.n2, w);
    else if (k == "eval") read(v, "eval", a.eval, w);
    else if (k == "L0") read(v, "L0", a.L0, w);
    else if (k == "inner") read(v, "inner", a.inner, w);
    else if (k == "H") read(v, "H", a.H, w);
    else if (k == "n_states") read(v, "n_states", a.n_states, w);
    else if (k == "n_actions") read(v, "n_actions", a.n_actions, w);
    else if (k == "restarts") read(v, "restarts", a.restarts, w);
    else throw ConfigError("unknown key algorithm." + k);
  }
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

void set_num(RegretTrace& tr, const std::string& key, double v) { tr.set_meta(key, format_double(v)); }

std::uint64_t instance_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.env.instance_seed >= 0 ? static_cast<std::uint64_t>(cfg.env.instance_seed) : seed;
}

EstimatorMode mode_of(const AlgoSpec& a) {
  return a.exact ? EstimatorMode::Exact : EstimatorMode::Sampled;
}

PhasedParams phased_params(const AlgoSpec& a, const RewardModel& m) {
  PhasedParams p;
  p.p = m.p;
  p.k = m.k;
  p.eps = a.eps;
  p.delta = a.delta;
  p.lambda1 = std::abs(m.lambdas.at(0));
  p.hint_mode = parse_hint_mode(a.r_star_hint);
  p.r_star_hint = a.r_star_value;
  p.C_n = a.C_n;
  p.C_m = a.C_m;
  p.C_L = a.C_L;
  p.C_S = a.C_S;
  p.L0_override = a.L0;
  p.n_override = a.n;
  p.m_override = a.m;
  p.eval_override = a.eval;
  p.inner_override = a.inner;
  p.mode = mode_of(a);
  return p;
}

double best_alignment(const BanditSession& s, const std::vector<Vec>& pool) {
  const Vec* v = std::get_if<Vec>(&s.optimal_action());
  if (!v) return kNaN;
  double best = -1.0;
  for (const Vec& a : pool) best = std::max(best, v->dot(a));
  return best;
}

void run_npm_family(const ExperimentConfig& cfg, BanditSession& s, RegretTrace& tr,
                    std::uint64_t seed, bool gap_free) {
  const RewardModel& m = s.model();
  const AlgoSpec& a = cfg.algo;
  NpmParams prm;
  prm.eps = a.eps;
  prm.delta = a.delta;
  prm.C_n = a.C_n;
  prm.C_m = a.C_m;
  prm.C_L = a.C_L;
  prm.lambda1 = m.lambdas.at(0);
  prm.lambda2 = m.k > 1 ? m.lambdas[1] : 0.0;
  prm.n_override = a.n;
  prm.L_override = a.L;
  prm.m_override = a.m;
  prm.mode = mode_of(a);
  prm.stop_at_eps = a.stop_at_eps;
  if (a.eps <= 0.0) {
    // Tune eps to the horizon.
    auto samples = [&](double eps) {
      NpmParams q = prm;
      q.eps = eps;
      const double alpha = gap_free ? 1.0 - eps * eps / 2.0 : std::abs(q.lambda2 / q.lambda1);
      try {
        const NpmSchedule sch = npm_schedule(m.d, q, alpha);
        return static_cast<double>(sch.n) * sch.L;
      } catch (const ConfigError&) {
        return std::numeric_limits<double>::infinity();  // batch size overflow
      }
    };
    // Gap-free runs accept eps below sqrt 2.
    const EtcPlan plan = tune_etc(samples, 2, static_cast<double>(cfg.T), s.r_star(), 1e-3,
                                  gap_free ? 1.4 : 0.49);
    prm.eps = plan.eps;
    set_num(tr, "planned_exploration", plan.exploration);
  }
  s.set_phase("explore");
  const NpmResult r = gap_free ? run_npm_gap_free(s, prm, seed) : run_npm(s, prm, seed);
  set_num(tr, "eps", prm.eps);
  tr.set_meta("n", std::to_string(r.schedule.n));
  tr.set_meta("L", std::to_string(r.schedule.L));
  set_num(tr, "m", r.schedule.m);
  tr.set_meta("samples", std::to_string(r.samples));
  tr.set_meta("samples_to_eps", std::to_string(r.samples_to_eps));
  set_num(tr, "tan_theta", tan_theta(r.a, std::get<Vec>(s.optimal_action())));
  if (cfg.T > 0 && !a.stop_at_eps) etc_commit(s, Action(r.a), cfg.T, &tr);
}

void run_subspace_family(const ExperimentConfig& cfg, BanditSession& s, RegretTrace& tr,
                         std::uint64_t seed, bool gap_free) {
  const RewardModel& m = s.model();
  const AlgoSpec& a = cfg.algo;
  SubspaceParams prm;
  prm.k = m.k;
  prm.eps = a.eps;
  prm.delta = a.delta;
  prm.C_n = a.C_n;
  prm.C_m = a.C_m;
  prm.C_L = a.C_L;
  prm.lambda_k = std::abs(m.lambdas.back());
  prm.n_override = a.n;
  prm.L_override = a.L;
  prm.m_override = a.m;
  prm.mode = mode_of(a);
  s.set_phase("explore");
  SubspaceResult r;
  if (gap_free) {
    GapFreeParams g;
    g.base = prm;
    g.mode = m.kind == ModelKind::LR ? GapFreeMode::LR : GapFreeMode::EV;
    if (a.scheme == "condition") g.scheme = GapFreeScheme::ConditionNumber;
    else if (a.scheme == "restart") g.scheme = GapFreeScheme::KRestart;
    else throw ConfigError("unknown gap-free scheme '" + a.scheme + "'");
    g.lambda1 = std::abs(m.lambdas[0]);
    g.eval_pulls = a.eval > 0 ? a.eval : 0;
    r = run_gap_free_subspace(s, g, seed);
  } else {
    r = run_subspace_iteration(s, prm, seed);
  }
  tr.set_meta("samples", std::to_string(r.samples));
  tr.set_meta("n", std::to_string(r.schedule.n));
  tr.set_meta("L", std::to_string(r.schedule.L));
  tr.set_meta("k_prime", std::to_string(r.chosen_k_prime));
  set_num(tr, "orthonormality_error", r.max_orthonormality_error);
  Action commit;
  if (m.kind == ModelKind::LR) {
    const Mat& Astar = std::get<Mat>(s.optimal_action());
    set_num(tr, "error", (r.A - Astar).norm());
    commit = r.A;
  } else {
    set_num(tr, "tan_theta", tan_theta(r.a, std::get<Vec>(s.optimal_action())));
    commit = r.a;
  }
  if (cfg.T > 0) etc_commit(s, commit, cfg.T, &tr);
}

void commit_rest(BanditSession& s, const Action& a, long long T) {
  if (T > s.t()) {
    s.set_phase("commit");
    s.pull_repeated(a, T - s.t());
  }
}

RegretTrace run_rl(const ExperimentConfig& cfg, std::uint64_t seed) {
  const AlgoSpec& a = cfg.algo;
  RegretTrace tr;
  const QuadraticMDP mdp = make_bellman_complete_mdp(cfg.env.d, cfg.env.k, a.H,
                                                     instance_seed(cfg, seed), a.n_states,
                                                     a.n_actions);
  RecoverParams rp;
  rp.C_n = a.C_n;
  rp.C_m = a.C_m;
  rp.C_L = a.C_L;
  rp.kappa = mdp.kappa;
  rp.n_override = a.n;
  rp.L_override = a.L;
  rp.m_override = a.m;
  rp.n2_override = a.n2;
  rp.mode = mode_of(a);
  const PolicyResult pr = learn_policy(mdp, a.eps, a.delta, rp, seed);
  long long t = 0;
  for (const LevelRecord& rec : pr.levels) {
    t += rec.samples;
    TraceRow row;
    row.t = t;
    row.phase = "h=" + std::to_string(rec.h);
    row.diagnostics = "error=" + format_double(rec.error) +
                      ";value_gap=" + format_double(rec.value_gap);
    tr.rows.push_back(row);
  }
  tr.set_meta("samples", std::to_string(pr.samples));
  set_num(tr, "value_gap", pr.value_gap);
  set_num(tr, "max_level_error", pr.max_level_error);
  set_num(tr, "level_eps", a.eps / a.H);
  set_num(tr, "kappa", mdp.kappa);
  return tr;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "env") parse_env(v, cfg.env);
    else if (k == "algorithm") parse_algo(v, cfg.algo);
    else if (k == "T") read(v, "T", cfg.T, "config");
    else if (k == "seeds") {
      if (v.is_number_integer()) {
        const long long n = v.get<long long>();
        if (n < 1) throw ConfigError("seeds count must be positive");
        cfg.seeds.clear();
        for (long long i = 1; i <= n; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(i));
      } else {
        read(v, "seeds", cfg.seeds, "config");
      }
    } else if (k == "output") read(v, "output", cfg.output, "config");
    else if (k == "trace_stride") read(v, "trace_stride", cfg.trace_stride, "config");
    else if (k == "metric") read(v, "metric", cfg.metric, "config");
    else if (k == "label") read(v, "label", cfg.label, "config");
    else throw ConfigError("unknown key " + k);
  }
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json env = {{"kind", to_string(c.env.kind)}, {"d", c.env.d}, {"k", c.env.k}, {"p", c.env.p},
              {"spectrum", c.env.spectrum}, {"sigma", c.env.sigma},
              {"alpha_star", c.env.alpha_star}, {"instance_seed", c.env.instance_seed}};
  const AlgoSpec& a = c.algo;
  json algo = {{"id", a.id}, {"eps", a.eps}, {"delta", a.delta}, {"C_n", a.C_n},
               {"C_m", a.C_m}, {"C_L", a.C_L}, {"C_S", a.C_S}, {"C_n2", a.C_n2},
               {"C_eps", a.C_eps}, {"lambda_ridge", a.lambda_ridge},
               {"beta_scale", a.beta_scale}, {"grid", a.grid}, {"tiebreak", a.tiebreak},
               {"r_star_hint", a.r_star_hint}, {"r_star_value", a.r_star_value},
               {"scheme", a.scheme}, {"stop_at_eps", a.stop_at_eps}, {"exact", a.exact},
               {"n", a.n}, {"m", a.m}, {"L", a.L}, {"n2", a.n2}, {"eval", a.eval},
               {"L0", a.L0}, {"inner", a.inner}, {"H", a.H}, {"n_states", a.n_states},
               {"n_actions", a.n_actions}, {"restarts", a.restarts}};
  json j = {{"env", env}, {"algorithm", algo}, {"T", c.T}, {"seeds", c.seeds},
            {"output", c.output}, {"trace_stride", c.trace_stride}, {"metric", c.metric},
            {"label", c.label}};
  return j.dump();
}

void validate_config(const ExperimentConfig& c) {
  const EnvSpec& e = c.env;
  const AlgoSpec& a = c.algo;
  if (!algorithm_ids().count(a.id)) throw ConfigError("unknown algorithm '" + a.id + "'");
  if (e.d < 1) throw ConfigError("env.d must be positive");
  if (e.k < 1 || e.k > e.d) throw ConfigError("env.k must lie in [1, d]");
  if (e.p < 1) throw ConfigError("env.p must be positive");
  if (!(e.sigma >= 0.0)) throw ConfigError("env.sigma must be nonnegative");
  if (c.T < 0) throw ConfigError("T must be nonnegative");
  if (c.seeds.empty()) throw ConfigError("at least one seed is required");
  if (c.trace_stride < 1) throw ConfigError("trace_stride must be positive");
  if (!(a.delta > 0.0 && a.delta < 1.0)) throw ConfigError("algorithm.delta must lie in (0,1)");
  if (a.H < 1) throw ConfigError("algorithm.H must be positive");
  parse_hint_mode(a.r_star_hint);
  parse_tie_break(a.tiebreak);
  auto need = [&](std::initializer_list<ModelKind> kinds) {
    for (ModelKind k : kinds)
      if (k == e.kind) return;
    throw ConfigError("algorithm " + a.id + " does not apply to " + to_string(e.kind));
  };
  if (a.id == "npm" || a.id == "npm_gap_free") need({ModelKind::EV});
  else if (a.id == "subspace") need({ModelKind::LR});
  else if (a.id == "gap_free_subspace") need({ModelKind::EV, ModelKind::LR});
  else if (a.id == "phased" || a.id == "burn_in") need({ModelKind::SYM, ModelKind::POLY_LOWRANK});
  else if (a.id == "alternating") need({ModelKind::ASYM});
  else if (a.id == "lin_ucb")
    need({ModelKind::EV, ModelKind::SYM, ModelKind::POLY_LOWRANK, ModelKind::POLY_QUX});
  else if (a.id == "identify_commit") need({ModelKind::POLY_LOWRANK, ModelKind::SYM});
  else if (a.id == "hardcase_ucb" || a.id == "hardcase_random") need({ModelKind::HARDCASE});
  if ((a.id == "hardcase_random" || a.id == "identify_commit") && e.sigma > 0.0)
    throw ConfigError(a.id + " needs sigma = 0");
  if (a.id == "rl") {
    if (!(a.eps > 0.0)) throw ConfigError("rl needs eps > 0");
    return;
  }
  if ((a.id == "npm" || a.id == "npm_gap_free") && a.eps <= 0.0 && c.T < 1)
    throw ConfigError("a tuned eps needs a horizon T");
  // Building the instance runs the model validation.
  build_model(c, c.seeds.front());
}

RewardModel build_model(const ExperimentConfig& cfg, std::uint64_t seed) {
  const EnvSpec& e = cfg.env;
  const std::uint64_t is = instance_seed(cfg, seed);
  if (e.kind == ModelKind::HARDCASE && !e.alpha_star.empty()) {
    RewardModel m = make_hardcase_model(e.d, e.p, e.alpha_star);
    m.seed = is;
    return m;
  }
  return make_random_model(e.kind, e.d, e.k, e.p, e.spectrum, is);
}

RegretTrace run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  const AlgoSpec& a = cfg.algo;
  RegretTrace tr;
  tr.set_meta("version", kVersion);
  tr.set_meta("algorithm", cfg.label.empty() ? a.id : cfg.label);
  tr.set_meta("seed", std::to_string(seed));
  tr.set_meta("config", config_to_json(cfg));
  if (a.id == "rl") {
    RegretTrace r = run_rl(cfg, seed);
    for (auto& kv : r.meta) tr.set_meta(kv.first, kv.second);
    tr.rows = std::move(r.rows);
    return tr;
  }
  auto model = std::make_shared<const RewardModel>(build_model(cfg, seed));
  BanditSession s(model, cfg.env.sigma, seed);
  s.attach_trace(&tr, cfg.trace_stride);
  set_num(tr, "r_star", s.r_star());
  const long long T = cfg.T;
  if (a.id == "optimal") {
    s.set_phase("commit");
    s.pull_repeated(s.optimal_action(), T);
  } else if (a.id == "npm" || a.id == "npm_gap_free") {
    run_npm_family(cfg, s, tr, seed, a.id == "npm_gap_free");
  } else if (a.id == "subspace" || a.id == "gap_free_subspace") {
    run_subspace_family(cfg, s, tr, seed, a.id == "gap_free_subspace");
  } else if (a.id == "phased") {
    const PhasedResult r = run_phased_elimination(s, phased_params(a, *model), seed);
    tr.set_meta("samples", std::to_string(r.samples));
    tr.set_meta("pool_size", std::to_string(r.pool.actions.size()));
    set_num(tr, "best_alignment", best_alignment(s, r.pool.actions));
    if (T > s.t()) {
      std::vector<Action> arms(r.pool.actions.begin(), r.pool.actions.end());
      s.set_phase("ucb");
      candidate_set_etc(s, arms, T, a.delta);
    }
  } else if (a.id == "burn_in") {
    BurnInParams bp;
    bp.phase = phased_params(a, *model);
    bp.C_n1 = a.C_n;
    bp.C_n2 = a.C_n2;
    bp.C_eps = a.C_eps;
    bp.phase.n_override = -1;
    const BurnInResult r = run_burn_in(s, bp, T, seed, &tr);
    tr.set_meta("n1", std::to_string(r.n1));
    tr.set_meta("n2", std::to_string(r.n2));
    set_num(tr, "phase2_eps", r.phase2_eps);
    tr.set_meta("phase1_success", r.phase1_success ? "1" : "0");
    tr.set_meta("samples", std::to_string(r.exploration));
    set_num(tr, "best_alignment", best_alignment(s, r.pool.actions));
  } else if (a.id == "alternating") {
    AlternatingParams ap;
    ap.p = model->p;
    ap.k = model->k;
    ap.eps = a.eps;
    ap.delta = a.delta;
    ap.lambda1 = std::abs(model->lambdas[0]);
    ap.hint_mode = parse_hint_mode(a.r_star_hint);
    ap.r_star_hint = a.r_star_value;
    ap.C_n = a.C_n;
    ap.C_m = a.C_m;
    ap.C_S = a.C_S;
    if (a.L0 > 0) ap.pool_cap = a.L0;
    ap.n_override = a.n;
    ap.m_override = a.m;
    ap.eval_override = a.eval;
    ap.cycles_override = a.inner;
    ap.mode = mode_of(a);
    const AlternatingResult r = run_alternating_power(s, ap, seed);
    tr.set_meta("samples", std::to_string(r.samples));
    set_num(tr, "best_reward", eval_tuple(*model, r.best));
    commit_rest(s, Action(r.best), T);
  } else if (a.id == "lin_ucb") {
    LinUcbParams lp;
    lp.p = model->p;
    lp.T = T;
    lp.lambda_ridge = a.lambda_ridge;
    lp.grid = a.grid;
    lp.delta = a.delta;
    lp.beta_scale = a.beta_scale;
    lp.stop_eps = a.stop_at_eps ? a.eps : 0.0;
    s.set_phase("linucb");
    const LinUcbResult r = run_lin_ucb_vectorized(s, lp, seed);
    tr.set_meta("samples", std::to_string(r.plays));
    tr.set_meta("samples_to_eps", std::to_string(r.samples_to_eps));
    tr.set_meta("feature_dim", std::to_string(r.feature_dim));
    tr.set_meta("grid", std::to_string(r.grid));
  } else if (a.id == "identify_commit") {
    FitParams fp;
    fp.restarts = a.restarts;
    const IdentifyCommitResult r = identify_then_commit(s, T, seed, fp);
    set_num(tr, "held_out_error", r.held_out_error);
    set_num(tr, "bound", r.bound);
    tr.set_meta("samples", std::to_string(r.exploration));
  } else if (a.id == "hardcase_ucb") {
    const HardCaseRun r = ucb_hard_case_run(model->d, model->p, model->alpha_star,
                                            parse_tie_break(a.tiebreak),
                                            Stream::derive(seed, StreamTag::Noiseless, 10));
    const int N = static_cast<int>(hardcase_vertices(model->d, model->p).size());
    s.set_phase("ucb");
    for (int v : r.played) {
      if (s.t() >= T) break;
      HullPoint h;
      h.weights = Vec::Zero(N);
      h.weights[v] = 1.0;
      s.pull_hull(h);
    }
    HullPoint best;
    best.weights = Vec::Zero(N);
    best.weights[r.identified] = 1.0;
    commit_rest(s, Action(best), T);
    tr.set_meta("plays", std::to_string(r.plays));
    tr.set_meta("samples", std::to_string(r.plays));
    tr.set_meta("all_vertices", r.all_vertices ? "1" : "0");
    tr.set_meta("certificate_ok", r.certificate_ok ? "1" : "0");
  } else if (a.id == "hardcase_random") {
    s.set_phase("random");
    const IdentifyResult r = identify_finite_class(s, Stream::derive(seed, StreamTag::Noiseless, 11));
    const auto verts = hardcase_vertices(model->d, model->p);
    HullPoint best;
    best.weights = Vec::Zero(static_cast<Eigen::Index>(verts.size()));
    best.weights[std::find(verts.begin(), verts.end(), r.alpha) - verts.begin()] = 1.0;
    commit_rest(s, Action(best), T);
    tr.set_meta("plays", std::to_string(r.actions_used));
    tr.set_meta("samples", std::to_string(r.actions_used));
    tr.set_meta("identified", join_ints(r.alpha));
  }
  s.flush_trace();
  set_num(tr, "regret", s.ledger().cumulative_regret);
  tr.set_meta("pulls", std::to_string(s.t()));
  return tr;
}

double trace_metric(const RegretTrace& tr, const std::string& metric) {
  const std::string v = tr.get_meta(metric);
  if (v.empty()) return kNaN;
  try {
    const double x = std::stod(v);
    if (metric == "samples_to_eps" && x < 0) return kNaN;
    return x;
  } catch (const std::exception&) {
    return kNaN;
  }
}

SlopeFit fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("slope fit needs >= 2 points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i]))
      throw AlgorithmError("slope fit needs positive finite values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("slope fit needs distinct x values");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double ssr = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ly[i] - (f.intercept + f.slope * lx[i]);
      ssr += r * r;
    }
    f.stderr_slope = std::sqrt(ssr / (n - 2) / sxx);
  }
  return f;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  for (double& x : v)
    if (std::isnan(x)) x = std::numeric_limits<double>::infinity();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int worker_threads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("POLYBANDIT_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task) {
  const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(worker_threads()), count);
  if (nt <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < nt; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

ExperimentConfig apply_axis(const ExperimentConfig& cfg, const std::string& axis, double value) {
  ExperimentConfig c = cfg;
  const long long v = std::llround(value);
  if (axis == "d") c.env.d = static_cast<int>(v);
  else if (axis == "T") c.T = v;
  else if (axis == "H") c.algo.H = static_cast<int>(v);
  else throw ConfigError("unknown sweep axis '" + axis + "' (d|T|H)");
  return c;
}

SweepResult sweep(const ExperimentConfig& cfg, const std::string& axis,
                  const std::vector<double>& values) {
  if (values.size() < 3) throw ConfigError("sweep needs at least three axis values");
  SweepResult res;
  res.axis = axis;
  res.metric = !cfg.metric.empty() ? cfg.metric
               : axis == "d"       ? "samples_to_eps"
               : axis == "T"       ? "regret"
                                   : "samples";
  std::vector<ExperimentConfig> cfgs;
  for (double v : values) {
    cfgs.push_back(apply_axis(cfg, axis, v));
    validate_config(cfgs.back());
  }
  const std::size_t ns = cfg.seeds.size();
  std::vector<double> out(values.size() * ns, kNaN);
  parallel_for(out.size(), [&](std::size_t i) {
    const RegretTrace tr = run_experiment(cfgs[i / ns], cfg.seeds[i % ns]);
    out[i] = trace_metric(tr, res.metric);
  });
  std::vector<double> xs, ys;
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    SweepPoint p;
    p.value = values[vi];
    p.metrics.assign(out.begin() + vi * ns, out.begin() + (vi + 1) * ns);
    p.median = median(p.metrics);
    if (!std::isfinite(p.median))
      throw AlgorithmError("incomplete grid: metric " + res.metric + " missing at " + axis + "=" +
                           format_double(p.value));
    xs.push_back(p.value);
    ys.push_back(p.median);
    res.points.push_back(std::move(p));
  }
  res.fit = fit_loglog_slope(xs, ys);
  return res;
}

void write_sweep_csv(std::ostream& os, const SweepResult& r) {
  os << "# metric=" << r.metric << "\r\n";
  os << "# slope=" << format_double(r.fit.slope) << "\r\n";
  os << "# stderr=" << format_double(r.fit.stderr_slope) << "\r\n";
  os << csv_field(r.axis) << ",median,seeds\r\n";
  for (const SweepPoint& p : r.points)
    os << format_double(p.value) << "," << format_double(p.median) << "," << p.metrics.size()
       << "\r\n";
}

void report(std::ostream& os, const std::vector<RegretTrace>& traces,
            const std::vector<std::string>& labels) {
  if (labels.size() != traces.size()) throw ConfigError("one label per trace is required");
  std::set<long long> ts;
  std::vector<std::map<long long, double>> cols(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    for (const TraceRow& r : traces[i].rows) {
      ts.insert(r.t);
      cols[i][r.t] = r.cumulative_regret;
    }
  }
  os << "t";
  for (const std::string& l : labels) os << "," << csv_field(l);
  os << "\r\n";
  for (long long t : ts) {
    os << t;
    for (const auto& c : cols) {
      const auto it = c.find(t);
      os << "," << (it == c.end() ? std::string("NA") : format_double(it->second));
    }
    os << "\r\n";
  }
}

}  // namespace polybandit
