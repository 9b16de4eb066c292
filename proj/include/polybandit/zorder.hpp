#pragma once

#include "polybandit/common.hpp"
#include "polybandit/env.hpp"
#include "polybandit/rng.hpp"

namespace polybandit {

struct ProbeBatch {
  long long n = 0;
  double m = 1.0;
  Mat Z;  // d x n, column i is z_i
  Vec rewards;
  Vec control_rewards;
  int resamples = 0;
};

constexpr int kMaxBatchRetries = 100;

// n probes z_i ~ N(0, I/m), redrawing the whole batch while any ||z_i|| > 1.
ProbeBatch sample_probes(Stream& rng, long long n, double m, int d);

// ceil(C_m d log(n/delta)), at least 1.
double default_probe_scale(double C_m, int d, double n, double delta);

// Streaming probe source for large batches.  Rejecting single probes with
// ||z|| > 1 draws from the same law as whole-batch redraws (the accepted
// batch is a product of per-probe conditionals); the retry cap is enforced
// through the expected number of whole-batch redraws implied by the
// observed rejection rate.
class ProbeSource {
 public:
  ProbeSource(Stream rng, double m, int d);
  const Vec& next();
  // Throws AlgorithmError when a batch of size n would need more than
  // kMaxBatchRetries whole-batch redraws in expectation.
  void check_batch(long long n) const;
  long long drawn() const { return drawn_; }
  long long rejected() const { return rejected_; }

 private:
  Stream rng_;
  double scale_;
  int d_;
  Vec z_;
  long long drawn_ = 0;
  long long rejected_ = 0;
};

struct EstimateStats {
  long long pulls = 0;
  long long rejected = 0;
};

// y = (m/n) sum r_i z_i from actions (a + z_i)/2; E[y] = M a / 2.
Vec estimate_matrix_action(BanditSession& s, const Vec& a, long long n, double m, Stream rng,
                           EstimateStats* stats = nullptr);
// Infinite-sample value M a / 2.
Vec expected_matrix_action(const RewardModel& model, const Vec& a);

// G_n(a) = (m/n) sum (r_i - r'_i) z_i with r_i at (1 - 1/2p) a + z_i / 2p and
// r'_i at z_i / 2p.  Uses 2n pulls.
Vec estimate_tensor_G(BanditSession& s, const Vec& a, int p, long long n, double m, Stream rng,
                      EstimateStats* stats = nullptr);

// Population operator sum over s = 0..floor((p-3)/2).  Includes the Gaussian
// pairing count (2s+1)!! so it equals the expectation of G_n for odd p.
Vec closed_form_G(const RewardModel& model, const Vec& a, int p, double m);
// For even p the expectation of G_n also carries
// c * sum_j lambda_j (v_j^T a) v_j; returns that term (zero for odd p).
Vec even_p_bias(const RewardModel& model, const Vec& a, int p, double m);
double even_p_bias_coefficient(int p, double m);
// closed_form_G + even_p_bias.
Vec expected_tensor_G(const RewardModel& model, const Vec& a, int p, double m);

}  // namespace polybandit
