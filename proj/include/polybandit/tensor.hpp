#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polybandit/common.hpp"
#include "polybandit/env.hpp"
#include "polybandit/rng.hpp"
#include "polybandit/spectral.hpp"

namespace polybandit {

struct CandidatePool {
  int stage = 0;
  double eps_s = 1.0;  // 2^-stage
  std::vector<Vec> actions;
  std::vector<double> rewards;  // r_n per candidate
  std::vector<int> ids;         // ids assigned at initialization
  long long n_s = 0;
  double m_s = 1.0;
};

// L0 = ceil(C_L k log(1/delta)) candidates uniform on the sphere, unless
// L0_override > 0.
CandidatePool init_candidates(Stream rng, int d, int k, double delta, double C_L = 4.0,
                              int L0_override = -1);

// max_{j != 1} |v_j^T a| <= 0.5 |v_1^T a| and |v_1^T a| >= 1/sqrt(d).
bool good_initial_candidate(const RewardModel& model, const Vec& a);

enum class HintMode { Oracle, Empirical };

HintMode parse_hint_mode(const std::string& s);

struct PhasedParams {
  int p = 3;
  int k = 1;
  double eps = 0.25;
  double delta = 0.1;
  double lambda1 = 1.0;  // oracle scale in the batch size
  HintMode hint_mode = HintMode::Empirical;
  double r_star_hint = 1.0;  // used in Oracle mode
  double C_n = 8.0;
  double C_m = 4.0;
  double C_L = 4.0;
  double C_S = 1.0;
  int L0_override = -1;
  long long n_override = -1;
  double m_override = -1.0;
  long long eval_override = -1;  // pulls per r_n estimate (default n_s)
  int inner_override = -1;
  EstimatorMode mode = EstimatorMode::Sampled;
  // Reuse a pool instead of sampling new candidates.
  const CandidatePool* start_pool = nullptr;
};

struct StageTelemetry {
  int stage = 0;
  int candidate = 0;
  int steps = 0;
  long long samples = 0;
  double r_n = 0.0;
  double tan_theta = 0.0;  // to the optimum when visible, else NaN
};

struct PhasedResult {
  CandidatePool pool;
  std::vector<StageTelemetry> telemetry;
  long long samples = 0;
  int stages = 0;
  int inner_steps = 0;
};

// S = C_S ceil(log2(1/eps)) + 1.
int phased_stage_count(double eps, double C_S);
// ceil((1/(1 - alpha)) log(2d)) with alpha = 1/2.
int phased_inner_steps(int d);
// C_n d^p log(d/delta) / (lambda1^2 eps_s^2), then one multiplication by log^3(n/delta).
long long phased_batch(int d, int p, double eps_s, double lambda1, double delta, double C_n);

PhasedResult run_phased_elimination(BanditSession& s, const PhasedParams& prm, std::uint64_t seed);

struct BurnInParams {
  PhasedParams phase;      // p, k, delta, constants, hint
  double C_n1 = 8.0;       // phase-1 batch constant
  double C_n2 = 8.0;       // phase-2 batch constant
  double C_eps = 1.0;      // phase-2 accuracy constant
  double ucb_delta = 0.1;
};

// Phase 1: n = C_n1 d^p log(d/delta) / lambda1^2.
long long burn_in_phase1_batch(int d, int p, double lambda1, double delta, double C_n1);
// Phase 2: n = C_n2 d^2 log(1/delta) / (lambda1^2 eps^2); no log(d) so the d^2 ratio is exact.
long long burn_in_phase2_batch(int d, double eps, double lambda1, double delta, double C_n2);
// eps_2 = C_eps k^{1/4} d^{1/2} lambda1^{-1/2} T^{-1/4}, clamped to (0, 1/p].
double burn_in_phase2_eps(int d, int k, int p, double lambda1, long long T, double C_eps);

struct BurnInResult {
  CandidatePool pool;
  bool phase1_success = false;  // some candidate with v_1^T a >= 1 - 1/p
  double phase2_eps = 0.0;
  long long n1 = 0;
  long long n2 = 0;
  long long exploration = 0;
  bool flagged = false;
};

BurnInResult run_burn_in(BanditSession& s, const BurnInParams& prm, long long T,
                         std::uint64_t seed, RegretTrace* trace);

struct AlternatingParams {
  int p = 3;
  int k = 1;
  double eps = 0.25;
  double delta = 0.1;
  double lambda1 = 1.0;
  HintMode hint_mode = HintMode::Empirical;
  double r_star_hint = 1.0;
  double C_n = 8.0;
  double C_m = 4.0;
  double C_S = 1.0;
  int pool_cap = 64;
  long long n_override = -1;
  double m_override = -1.0;
  long long eval_override = -1;
  int cycles_override = -1;
  EstimatorMode mode = EstimatorMode::Sampled;
};

struct AlternatingResult {
  std::vector<Vec> best;
  double best_reward = 0.0;
  std::vector<std::vector<Vec>> pool;
  std::vector<double> rewards;
  long long samples = 0;
  int stages = 0;
  int initial_pool = 0;
};

// Pool size ceil((2k log(p/delta))^p), capped.
int alternating_pool_size(int k, int p, double delta, int cap);
// Slot-q contraction T(a_1, .., I, .., a_p) of an ASYM model.
Vec slot_contraction(const RewardModel& model, const std::vector<Vec>& a, int q);
// (m/n) sum r_i z_i with slot q replaced by z_i; E = slot_contraction.
Vec estimate_slot(BanditSession& s, const std::vector<Vec>& a, int q, long long n, double m,
                  Stream rng);

AlternatingResult run_alternating_power(BanditSession& s, const AlternatingParams& prm,
                                        std::uint64_t seed);

// r* min{2, p zeta^2}.
double angle_to_regret(double zeta, int p, double r_star);

}  // namespace polybandit
