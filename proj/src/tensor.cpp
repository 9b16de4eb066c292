#include "polybandit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polybandit/baselines.hpp"
#include "polybandit/linalg.hpp"
#include "polybandit/zorder.hpp"

namespace polybandit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

long long ceil_count(double x) {
  if (!(x >= 1.0)) return 1;
  if (x > 9.0e18) throw ConfigError("batch size overflows");
  return static_cast<long long>(std::ceil(x));
}

bool is_sym(const RewardModel& m) {
  return m.kind == ModelKind::SYM || m.kind == ModelKind::POLY_LOWRANK;
}

double visible_tan(const BanditSession& s, const Vec& a) {
  const Action& opt = s.optimal_action();
  if (const Vec* v = std::get_if<Vec>(&opt)) return tan_theta(a, *v);
  return kNaN;
}

double estimate_reward(BanditSession& s, const Action& a, long long n, EstimatorMode mode) {
  if (mode == EstimatorMode::Exact) return eval_mean(s.model(), a);
  return s.pull_repeated(a, n) / static_cast<double>(n);
}

}  // namespace

CandidatePool init_candidates(Stream rng, int d, int k, double delta, double C_L,
                              int L0_override) {
  if (k < 1 || k > d) throw ConfigError("init_candidates needs 1 <= k <= d");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  const int L0 = L0_override > 0
                     ? L0_override
                     : std::max(1, static_cast<int>(std::ceil(C_L * k * std::log(1.0 / delta))));
  CandidatePool pool;
  pool.stage = 0;
  pool.eps_s = 1.0;
  for (int i = 0; i < L0; ++i) {
    pool.actions.push_back(rng.unit_sphere(d));
    pool.rewards.push_back(0.0);
    pool.ids.push_back(i);
  }
  return pool;
}

bool good_initial_candidate(const RewardModel& model, const Vec& a) {
  const Mat& V = model.frames.at(0);
  const Vec c = V.transpose() * a;
  const double top = std::abs(c[0]);
  if (top < 1.0 / std::sqrt(static_cast<double>(model.d)) - 1e-12) return false;
  for (int j = 1; j < c.size(); ++j)
    if (std::abs(c[j]) > 0.5 * top) return false;
  return true;
}

HintMode parse_hint_mode(const std::string& s) {
  if (s == "oracle") return HintMode::Oracle;
  if (s == "empirical") return HintMode::Empirical;
  throw ConfigError("unknown r_star_hint mode '" + s + "'");
}

int phased_stage_count(double eps, double C_S) {
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("eps must lie in (0,1)");
  if (!(C_S > 0.0)) throw ConfigError("C_S must be positive");
  return static_cast<int>(std::ceil(C_S * std::ceil(std::log2(1.0 / eps)))) + 1;
}

int phased_inner_steps(int d) {
  const double alpha = 0.5;
  return std::max(1, static_cast<int>(std::ceil(std::log(2.0 * d) / (1.0 - alpha))));
}

long long phased_batch(int d, int p, double eps_s, double lambda1, double delta, double C_n) {
  if (!(lambda1 > 0.0)) throw ConfigError("lambda1 must be positive");
  const double base = C_n * std::pow(static_cast<double>(d), p) * std::log(d / delta) /
                      (lambda1 * lambda1 * eps_s * eps_s);
  const double n0 = std::max(1.0, std::ceil(base));
  const double lg = std::max(1.0, std::log(n0 / delta));
  return ceil_count(n0 * lg * lg * lg);
}

PhasedResult run_phased_elimination(BanditSession& s, const PhasedParams& prm,
                                    std::uint64_t seed) {
  const RewardModel& model = s.model();
  if (!is_sym(model)) throw ConfigError("phased elimination needs a SYM session");
  if (prm.p < 2) throw ConfigError("phased elimination needs p >= 2");
  if (model.p != prm.p) throw ConfigError("p does not match the model degree");
  const int d = model.d;
  PhasedResult res;
  res.stages = phased_stage_count(prm.eps, prm.C_S);
  res.inner_steps = prm.inner_override > 0 ? prm.inner_override : phased_inner_steps(d);
  CandidatePool pool = prm.start_pool ? *prm.start_pool
                                      : init_candidates(Stream::derive(seed, StreamTag::Init), d,
                                                        prm.k, prm.delta, prm.C_L,
                                                        prm.L0_override);
  if (pool.actions.empty()) throw AlgorithmError("empty candidate pool");
  // delta split evenly across stages and candidates.
  const double delta_s =
      prm.delta / (static_cast<double>(res.stages) * static_cast<double>(pool.actions.size()));
  const int stage0 = pool.stage;
  for (int si = 1; si <= res.stages; ++si) {
    const int stage = stage0 + si;
    const double eps_s = std::ldexp(1.0, -stage);
    const long long n = prm.n_override > 0
                            ? prm.n_override
                            : phased_batch(d, prm.p, eps_s, prm.lambda1, delta_s, prm.C_n);
    const double m = prm.m_override > 0
                         ? prm.m_override
                         : default_probe_scale(prm.C_m, d, static_cast<double>(n), delta_s);
    const long long n_eval = prm.eval_override > 0 ? prm.eval_override : n;
    s.set_phase("stage" + std::to_string(stage));
    for (std::size_t c = 0; c < pool.actions.size(); ++c) {
      Vec a = pool.actions[c];
      long long used = 0;
      for (int step = 0; step < res.inner_steps; ++step) {
        Vec g;
        if (prm.mode == EstimatorMode::Exact) {
          g = expected_tensor_G(model, a, prm.p, m);
        } else {
          const Stream probe = Stream::derive(seed, StreamTag::Tensor,
                                              static_cast<std::uint64_t>(pool.ids[c]),
                                              static_cast<std::uint64_t>(stage) * 4096 + step);
          g = estimate_tensor_G(s, a, prm.p, n, m, probe);
          used += 2 * n;
        }
        const double gn = g.norm();
        if (!(gn > 0.0)) break;  // a is orthogonal to every component; keep it
        a = g / gn;
      }
      const double r = estimate_reward(s, Action(a), n_eval, prm.mode);
      if (prm.mode == EstimatorMode::Sampled) used += n_eval;
      pool.actions[c] = a;
      pool.rewards[c] = r;
      res.samples += used;
      StageTelemetry t;
      t.stage = stage;
      t.candidate = pool.ids[c];
      t.steps = res.inner_steps;
      t.samples = used;
      t.r_n = r;
      t.tan_theta = visible_tan(s, a);
      res.telemetry.push_back(t);
    }
    const double hint = prm.hint_mode == HintMode::Oracle
                            ? prm.r_star_hint
                            : *std::max_element(pool.rewards.begin(), pool.rewards.end());
    const double threshold = hint - std::abs(hint) * prm.p * eps_s * eps_s;
    CandidatePool next;
    next.stage = stage;
    next.eps_s = eps_s;
    next.n_s = n;
    next.m_s = m;
    for (std::size_t c = 0; c < pool.actions.size(); ++c) {
      if (pool.rewards[c] >= threshold) {
        next.actions.push_back(pool.actions[c]);
        next.rewards.push_back(pool.rewards[c]);
        next.ids.push_back(pool.ids[c]);
      }
    }
    if (next.actions.empty())
      throw AlgorithmError("candidate pool empty after stage " + std::to_string(stage) +
                           "; r_star_hint or budget mis-calibrated");
    pool = std::move(next);
  }
  res.pool = std::move(pool);
  return res;
}

long long burn_in_phase1_batch(int d, int p, double lambda1, double delta, double C_n1) {
  if (!(lambda1 > 0.0)) throw ConfigError("lambda1 must be positive");
  return ceil_count(C_n1 * std::pow(static_cast<double>(d), p) * std::log(d / delta) /
                    (lambda1 * lambda1));
}

long long burn_in_phase2_batch(int d, double eps, double lambda1, double delta, double C_n2) {
  if (!(lambda1 > 0.0 && eps > 0.0)) throw ConfigError("lambda1 and eps must be positive");
  const double dd = static_cast<double>(d);
  return ceil_count(C_n2 * dd * dd * std::log(1.0 / delta) / (lambda1 * lambda1 * eps * eps));
}

double burn_in_phase2_eps(int d, int k, int p, double lambda1, long long T, double C_eps) {
  if (T < 1) throw ConfigError("horizon must be positive");
  const double e = C_eps * std::pow(static_cast<double>(k), 0.25) * std::sqrt(static_cast<double>(d)) /
                   std::sqrt(lambda1) * std::pow(static_cast<double>(T), -0.25);
  return std::min(e, 1.0 / p);
}

BurnInResult run_burn_in(BanditSession& s, const BurnInParams& prm, long long T,
                         std::uint64_t seed, RegretTrace* trace) {
  const RewardModel& model = s.model();
  const int d = model.d;
  const PhasedParams& base = prm.phase;
  BurnInResult out;
  out.n1 = burn_in_phase1_batch(d, base.p, base.lambda1, base.delta, prm.C_n1);
  out.phase2_eps = burn_in_phase2_eps(d, base.k, base.p, base.lambda1, T, prm.C_eps);
  out.n2 = burn_in_phase2_batch(d, out.phase2_eps, base.lambda1, base.delta, prm.C_n2);

  PhasedParams p1 = base;
  p1.eps = 1.0 / base.p;
  p1.n_override = base.n_override > 0 ? base.n_override : out.n1;
  s.set_phase("burnin");
  PhasedResult r1 = run_phased_elimination(s, p1, seed);
  if (const Vec* v = std::get_if<Vec>(&s.optimal_action())) {
    for (const Vec& a : r1.pool.actions)
      if (v->dot(a) >= 1.0 - 1.0 / base.p) out.phase1_success = true;
  }

  PhasedParams p2 = base;
  p2.eps = out.phase2_eps;
  p2.n_override = out.n2;
  p2.start_pool = &r1.pool;
  p2.C_S = 1.0;
  s.set_phase("refine");
  PhasedResult r2 = run_phased_elimination(s, p2, seed ^ 0x5bd1e995ULL);
  out.pool = r2.pool;
  out.exploration = s.t();
  if (s.t() >= T) {
    out.flagged = true;
    if (trace) {
      trace->flagged = true;
      trace->flag_reason = "burn-in used " + std::to_string(s.t()) + " pulls, horizon " +
                           std::to_string(T);
    }
    s.flush_trace();
    return out;
  }
  std::vector<Action> arms;
  for (const Vec& a : out.pool.actions) arms.emplace_back(a);
  s.set_phase("ucb");
  candidate_set_etc(s, arms, T, prm.ucb_delta);
  s.flush_trace();
  return out;
}

int alternating_pool_size(int k, int p, double delta, int cap) {
  const double size = std::ceil(std::pow(2.0 * k * std::log(p / delta), p));
  if (cap > 0 && size > cap) return cap;
  return std::max(1, static_cast<int>(size));
}

Vec slot_contraction(const RewardModel& model, const std::vector<Vec>& a, int q) {
  if (model.kind != ModelKind::ASYM) throw ConfigError("slot contraction needs an ASYM model");
  Vec y = Vec::Zero(model.d);
  for (int j = 0; j < model.k; ++j) {
    double coef = model.lambdas[j];
    for (int r = 0; r < model.p; ++r)
      if (r != q) coef *= model.frames[r].col(j).dot(a[r]);
    y += coef * model.frames[q].col(j);
  }
  return y;
}

Vec estimate_slot(BanditSession& s, const std::vector<Vec>& a, int q, long long n, double m,
                  Stream rng) {
  if (n < 1) throw ConfigError("batch size must be positive");
  const int d = s.model().d;
  ProbeSource src(rng, m, d);
  std::vector<Vec> act = a;
  Vec acc = Vec::Zero(d);
  for (long long i = 0; i < n; ++i) {
    const Vec& z = src.next();
    act[q] = z;
    acc.noalias() += s.pull_tuple(act) * z;
  }
  src.check_batch(n);
  return acc * (m / static_cast<double>(n));
}

AlternatingResult run_alternating_power(BanditSession& s, const AlternatingParams& prm,
                                        std::uint64_t seed) {
  const RewardModel& model = s.model();
  if (model.kind != ModelKind::ASYM) throw ConfigError("alternating power needs an ASYM session");
  if (prm.p < 2 || prm.p != model.p) throw ConfigError("p does not match the model");
  const int d = model.d;
  AlternatingResult res;
  res.stages = phased_stage_count(prm.eps, prm.C_S);
  const int L0 = alternating_pool_size(prm.k, prm.p, prm.delta, prm.pool_cap);
  res.initial_pool = L0;
  Stream init = Stream::derive(seed, StreamTag::Init);
  std::vector<std::vector<Vec>> pool(L0);
  std::vector<int> ids(L0);
  for (int c = 0; c < L0; ++c) {
    ids[c] = c;
    for (int q = 0; q < prm.p; ++q) pool[c].push_back(init.unit_sphere(d));
  }
  std::vector<double> rewards(L0, 0.0);
  const int cycles = prm.cycles_override > 0 ? prm.cycles_override : phased_inner_steps(d);
  const double delta_s = prm.delta / (static_cast<double>(res.stages) * L0);
  for (int stage = 1; stage <= res.stages; ++stage) {
    const double eps_s = std::ldexp(1.0, -stage);
    const long long n = prm.n_override > 0
                            ? prm.n_override
                            : phased_batch(d, prm.p, eps_s, prm.lambda1, delta_s, prm.C_n);
    const double m = prm.m_override > 0
                         ? prm.m_override
                         : default_probe_scale(prm.C_m, d, static_cast<double>(n), delta_s);
    const long long n_eval = prm.eval_override > 0 ? prm.eval_override : n;
    s.set_phase("stage" + std::to_string(stage));
    for (std::size_t c = 0; c < pool.size(); ++c) {
      std::vector<Vec>& a = pool[c];
      for (int cyc = 0; cyc < cycles; ++cyc) {
        for (int q = 0; q < prm.p; ++q) {
          Vec y;
          if (prm.mode == EstimatorMode::Exact) {
            y = slot_contraction(model, a, q);
          } else {
            const Stream probe = Stream::derive(
                seed, StreamTag::Tensor, static_cast<std::uint64_t>(ids[c]),
                (static_cast<std::uint64_t>(stage) * 4096 + cyc) * 64 + q);
            y = estimate_slot(s, a, q, n, m, probe);
            res.samples += n;
          }
          const double yn = y.norm();
          if (yn > 0.0) a[q] = y / yn;
        }
      }
      rewards[c] = estimate_reward(s, Action(a), n_eval, prm.mode);
      if (prm.mode == EstimatorMode::Sampled) res.samples += n_eval;
    }
    const double hint = prm.hint_mode == HintMode::Oracle
                            ? prm.r_star_hint
                            : *std::max_element(rewards.begin(), rewards.end());
    const double threshold = hint - std::abs(hint) * prm.p * eps_s;
    std::vector<std::vector<Vec>> next;
    std::vector<double> next_r;
    std::vector<int> next_ids;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (rewards[c] >= threshold) {
        next.push_back(pool[c]);
        next_r.push_back(rewards[c]);
        next_ids.push_back(ids[c]);
      }
    }
    if (next.empty())
      throw AlgorithmError("tuple pool empty after stage " + std::to_string(stage));
    pool = std::move(next);
    rewards = std::move(next_r);
    ids = std::move(next_ids);
  }
  const auto best = std::max_element(rewards.begin(), rewards.end()) - rewards.begin();
  res.best = pool[best];
  res.best_reward = rewards[best];
  res.pool = std::move(pool);
  res.rewards = std::move(rewards);
  return res;
}

double angle_to_regret(double zeta, int p, double r_star) {
  if (!(zeta >= 0.0)) throw ConfigError("angle must be nonnegative");
  return r_star * std::min(2.0, p * zeta * zeta);
}

}  // namespace polybandit
