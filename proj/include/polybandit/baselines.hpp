#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "polybandit/common.hpp"
#include "polybandit/env.hpp"
#include "polybandit/rng.hpp"

namespace polybandit {

struct ArmStats {
  std::vector<long long> counts;
  std::vector<double> means;
};

struct FiniteUcbResult {
  ArmStats stats;
  long long plays = 0;
};

// Index policy mean + sqrt(log(T K / delta) / N) for T plays; every arm is
// played once first, ties go to the lowest index.
FiniteUcbResult run_finite_ucb(BanditSession& s, const std::vector<Action>& arms, long long T,
                               double delta);

struct LinUcbParams {
  int p = 2;
  long long T = 10000;
  double lambda_ridge = 1.0;
  int grid = 0;  // sphere grid size; 0: twice the lifted dimension
  double delta = 0.1;
  double beta_scale = 1.0;
  double S = 1.0;  // bound on the parameter norm
  // Offer the greedy maximizer of the estimate as an extra arm.
  bool greedy_arm = true;
  // Stop once the greedy estimate is within eps (EV only); 0 disables.
  double stop_eps = 0.0;
  // Audit confidence-set coverage of the true parameter every audit_every
  // plays; 0 disables.
  long long audit_every = 0;
};

struct LinUcbResult {
  Vec theta;  // ridge estimate in the lifted basis
  Vec greedy;  // argmax of the estimated reward
  long long plays = 0;
  long long samples_to_eps = -1;
  int feature_dim = 0;
  int grid = 0;
  long long audits = 0;
  long long covered = 0;
};

// Symmetric lift of degree p: one coordinate per multiset of indices over
// [1, a], scaled by the square root of its multiplicity, so that
// <lift(a), lift(b)> = (1 + a^T b)^p and lifted polynomials keep their
// Frobenius norm.
Vec symmetric_lift(const Vec& a, int p);
// Coefficients of a model's mean reward in the symmetric lift.
Vec lift_parameter(const RewardModel& model, int p);
// Reward polynomial as a symmetric d x d matrix from a p = 2 lifted parameter
// (ignoring the affine part).
Mat lifted_quadratic_matrix(const Vec& theta, int d);

// Candidates: a seeded sphere grid plus the greedy maximizer of the current
// estimate.
LinUcbResult run_lin_ucb_vectorized(BanditSession& s, const LinUcbParams& prm, std::uint64_t seed);

struct PacToRegret {
  double zeta = 0.0;
  double T1 = 0.0;
  double bound = 0.0;
};

// zeta = (A / (T p))^{1/(a+2)}, T1 = A zeta^-a,
// bound = T^{a/(a+2)} p^{a/(a+2)} A^{2/(a+2)} r*.
PacToRegret pac_to_regret(double A, double a_exp, int p, double T, double r_star);

struct EtcPlan {
  double eps = 0.0;
  double exploration = 0.0;
  double bound = 0.0;
};

// Minimizes S(eps) r* + (T - S(eps)) r* min{2, p eps^2} over a log grid of
// eps in [eps_min, eps_max] among plans with S(eps) <= T; S is the exploration-sample
// function.  With no feasible plan, eps_max and the bound T r* are returned.
EtcPlan tune_etc(const std::function<double(double)>& samples, int p, double T, double r_star,
                 double eps_min = 1e-3, double eps_max = 0.49, int grid = 400);

// Finite-arm UCB on a candidate pool for the rest of the horizon T.
FiniteUcbResult candidate_set_etc(BanditSession& s, const std::vector<Action>& pool, long long T,
                                  double delta = 0.1);

}  // namespace polybandit
