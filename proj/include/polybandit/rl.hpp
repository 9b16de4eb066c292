#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "polybandit/common.hpp"
#include "polybandit/rng.hpp"
#include "polybandit/spectral.hpp"

namespace polybandit {

// Finite-core MDP with quadratic rewards and transitions.  At level h
// (0-based) the reward is phi^T R_h phi with R_h = U_h diag(rho_h) U_h^T and
// P(s' | phi) = phi^T Psi_h(s') phi with Psi_h(s') = U_h diag(D_h(:, s')) U_h^T.
// The remaining mass goes to an absorbing terminal state with zero value, so
// the Bellman image of any value vector is again rank <= k in span(U_h).
struct QuadraticMDP {
  int H = 1;
  int d = 1;
  int k = 1;
  int n_states = 1;
  int n_actions = 1;
  std::vector<std::vector<Vec>> features;  // [state][action], norm <= 1
  std::vector<Mat> U;                      // per level, d x k orthonormal
  std::vector<Vec> rho;                    // per level, k
  std::vector<Mat> D;                      // per level, k x n_states, nonnegative
  double kappa = 1.0;                      // max over levels of lambda_1 / lambda_min of M*_h

  Mat reward_matrix(int h) const;
  Mat psi(int h, int s_next) const;
  // Core-state probabilities for a feature with norm <= 1; the terminal
  // state takes 1 - sum.
  Vec transition(int h, const Vec& phi) const;
  // R_h + sum_s' V(s') Psi_h(s').
  Mat bellman_image(int h, const Vec& v_next) const;
  // max_a phi(s, a)^T Q phi(s, a) for every core state.
  Vec greedy_values(const Mat& Q) const;
  std::vector<int> greedy_policy(const Mat& Q) const;
};

QuadraticMDP make_bellman_complete_mdp(int d, int k, int H, std::uint64_t seed, int n_states = 12,
                                       int n_actions = 8);

// Exact optimal Q matrices M*_h (index h) and values at level 0.
std::vector<Mat> optimal_q_matrices(const QuadraticMDP& mdp);
// Value of a deterministic policy [h][state] -> action at level 0, per start state.
Vec policy_value(const QuadraticMDP& mdp, const std::vector<std::vector<int>>& policy);
Vec optimal_value(const QuadraticMDP& mdp);

// Generative query at level h: y = phi^T M_h phi + eta, where M_h is the
// Bellman image of v_next and eta = |phi|^2 (v_next(s') - E v_next) with s'
// drawn from the transition at phi / |phi|.
class GenerativeOracle {
 public:
  GenerativeOracle(const QuadraticMDP& mdp, int h, Vec v_next, Stream rng);
  double operator()(const Vec& phi);
  const Mat& target() const { return M_; }
  long long queries() const { return queries_; }

 private:
  const QuadraticMDP& mdp_;
  int h_;
  Vec v_next_;
  Mat M_;
  Stream rng_;
  long long queries_ = 0;
};

struct RecoverParams {
  double C_n = 8.0;
  double C_m = 4.0;
  double C_L = 4.0;
  double kappa = 1.0;  // condition bound in the batch size
  long long n_override = -1;
  int L_override = -1;
  double m_override = -1.0;
  long long n2_override = -1;  // pulls per stage-2 design
  // Exact: stage 1 uses polarization queries (2d per column), exact for a
  // noiseless oracle.
  EstimatorMode mode = EstimatorMode::Sampled;
  double residual_tol = 0.5;
};

struct RecoverResult {
  Mat M;  // X C X^T
  Mat X;  // d x k frame
  Mat C;  // k x k core
  long long samples = 0;
  long long n = 0;
  int L = 0;
  double residual = 0.0;  // max gap on held-out stage-2 designs
};

// Stage 1: subspace iteration on the quadratic oracle with k' = 2k, frame =
// top-k eigenvectors (by magnitude) of the symmetrized Y X_prev^T.
// Stage 2: least squares for C from rewards at a = X w over the k(k+1)/2
// designs e_i and (e_i + e_j)/sqrt 2.
RecoverResult recover_quadratic_matrix(const QuadraticOracle& oracle, int d, int k, double eps,
                                       double delta, const RecoverParams& prm, Stream rng);

struct LevelRecord {
  int h = 0;
  long long samples = 0;
  double error = 0.0;      // ||M_hat_h - M_h||_2
  double value_gap = 0.0;  // max_s |V_hat_h - V^*_h| so far
};

struct PolicyResult {
  std::vector<Mat> M_hat;
  std::vector<Mat> M_target;
  std::vector<std::vector<int>> policy;  // [h][state]
  std::vector<LevelRecord> levels;
  long long samples = 0;
  double value_gap = 0.0;  // max_s V*(s) - V^pi(s) at level 0
  double max_level_error = 0.0;
};

// Backward loop h = H-1..0 recovering each Bellman image at accuracy eps/H.
PolicyResult learn_policy(const QuadraticMDP& mdp, double eps, double delta,
                          const RecoverParams& prm, std::uint64_t seed);

}  // namespace polybandit
