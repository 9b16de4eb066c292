#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "polybandit/common.hpp"
#include "polybandit/env.hpp"
#include "polybandit/rng.hpp"

namespace polybandit {

// Sampled: zeroth-order estimates from pulls.  Exact: the estimator is
// replaced by its expectation (M a, M X), no pulls are made.
enum class EstimatorMode { Sampled, Exact };

struct IterationDiag {
  int l = 0;
  long long samples = 0;
  double tan_theta = 0.0;      // to the optimum (NaN if not visible)
  double noise_norm = 0.0;     // ||G_l||, estimate minus expectation
  double noise_on_top = 0.0;   // ||V^T G_l|| on the top eigenvector
  double gap_condition = 0.0;  // 5 ||G_l|| / (eps * gap), <= 1 when the noise condition holds
};

struct NpmParams {
  double eps = 0.1;
  double delta = 0.1;
  double C_n = 8.0;
  double C_m = 4.0;
  double C_L = 4.0;
  // Oracle spectrum parameters (the player does not know them).
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  long long n_override = -1;
  int L_override = -1;
  double m_override = -1.0;
  EstimatorMode mode = EstimatorMode::Sampled;
  // Stop as soon as the iterate is within eps of the optimum (needs the
  // visible model; used to measure samples-to-eps).
  bool stop_at_eps = false;
  std::optional<Vec> start;
};

struct NpmSchedule {
  long long n = 0;
  double m = 1.0;
  int L = 0;
  double alpha = 0.0;
  long long total() const { return n * static_cast<long long>(L); }
};

// n = C_n d^2 log(d/delta) / (lambda1 (1 - alpha))^2 / eps^2, m = C_m d log(n/delta),
// L = floor(C_L log(d/eps) / (1 - alpha)) + 1.
NpmSchedule npm_schedule(int d, const NpmParams& prm, double alpha);

struct NpmResult {
  Vec a;
  long long samples = 0;
  int iterations = 0;
  // Samples consumed when the iterate first reached tan_theta <= eps; -1 if never.
  long long samples_to_eps = -1;
  NpmSchedule schedule;
  std::vector<IterationDiag> diag;
};

NpmResult run_npm(BanditSession& s, const NpmParams& prm, std::uint64_t seed);
// alpha = 1 - eps^2/2; PSD models (shift first otherwise).
NpmResult run_npm_gap_free(BanditSession& s, const NpmParams& prm, std::uint64_t seed);

// M + |lambda_k| I; zero eigenvalues are dropped from the frame.
RewardModel shift_psd(const RewardModel& ev);
RewardModel asym_to_sym(const Mat& Mtilde);

struct SubspaceParams {
  int k = 1;
  double eps = 0.1;
  double delta = 0.1;
  double C_n = 8.0;
  double C_m = 4.0;
  double C_L = 4.0;
  double lambda_k = 1.0;  // oracle parameter
  long long n_override = -1;
  int L_override = -1;
  double m_override = -1.0;
  EstimatorMode mode = EstimatorMode::Sampled;
};

struct SubspaceSchedule {
  int k_prime = 2;
  long long n = 0;
  double m = 1.0;
  int L = 0;
  long long total() const { return n * k_prime * static_cast<long long>(L); }
};

// n = C_n d^2 log^2(d/delta) / lambda_k^2 / eps^2, L = floor(C_L log(d/eps)) + 1.
SubspaceSchedule subspace_schedule(int d, const SubspaceParams& prm);

struct SubspaceResult {
  Mat A;  // unit Frobenius norm (LR) ...
  Vec a;  // ... or unit vector (EV mode)
  Mat X;  // final frame
  long long samples = 0;
  SubspaceSchedule schedule;
  std::vector<IterationDiag> diag;
  double max_orthonormality_error = 0.0;
  int chosen_k_prime = 0;
  std::vector<double> restart_rewards;
};

SubspaceResult run_subspace_iteration(BanditSession& s, const SubspaceParams& prm,
                                      std::uint64_t seed);

enum class GapFreeMode { EV, LR };
enum class GapFreeScheme { ConditionNumber, KRestart };

struct GapFreeParams {
  SubspaceParams base;
  GapFreeMode mode = GapFreeMode::EV;
  GapFreeScheme scheme = GapFreeScheme::ConditionNumber;
  double lambda1 = 1.0;     // oracle parameter
  long long eval_pulls = 0;  // pulls per restart to score its output (k-restart)
};

SubspaceResult run_gap_free_subspace(BanditSession& s, const GapFreeParams& prm,
                                     std::uint64_t seed);

// Quadratic probe access a -> a^T M a + noise on the unit ball.
using QuadraticOracle = std::function<double(const Vec&)>;

struct QuadraticSubspaceResult {
  Mat X;       // d x k' frame after the last iteration
  Mat Y;       // last estimate, E[Y] = 2 M X_prev
  Mat X_prev;  // frame the last estimate was taken at
  long long samples = 0;
  double max_orthonormality_error = 0.0;
};

// Subspace iteration on a bare quadratic oracle with probes (X(s) + z_i)/2.
QuadraticSubspaceResult quadratic_subspace_iteration(const QuadraticOracle& oracle, int d,
                                                     int k_prime, long long n, double m, int L,
                                                     Stream rng);

// Plays a for the rest of the horizon T.  If exploration already used more
// than T pulls the trace is flagged and nothing is played.
void etc_commit(BanditSession& s, const Action& a, long long T, RegretTrace* trace);

// Eigengap pigeonhole: the index l (1-based) maximising |lambda_l| - |lambda_{l+1}|
// (lambda_{k+1} = 0).  Asserts the gap is at least |lambda_1| / k.
int largest_gap_index(const std::vector<double>& lambdas);

}  // namespace polybandit
