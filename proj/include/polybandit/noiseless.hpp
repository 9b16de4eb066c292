#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polybandit/common.hpp"
#include "polybandit/env.hpp"
#include "polybandit/rng.hpp"

namespace polybandit {

constexpr long long kTensorizeCap = 10000000;

// [1, a]^{(x)p} flattened in row-major multi-index order.
Vec tensorize(const Vec& a, int p, long long cap = kTensorizeCap);

struct TensorizedSample {
  Vec a;
  Vec X;  // tensorize(a, p)
  double r = 0.0;
};

// Random point of conv(vertices, 0): uniform (flat Dirichlet) weights over
// the vertices and the origin.
HullPoint random_hull_point(Stream& rng, int num_vertices);

struct IdentifyResult {
  std::vector<int> alpha;
  int actions_used = 0;
};

// Plays random hull points and drops every model whose prediction differs
// from the observed reward by more than 1e-9.
IdentifyResult identify_finite_class(BanditSession& s, Stream rng, int max_actions = -1);

struct LowRankFit {
  int p = 3;
  std::vector<double> lambdas;
  Mat V;  // unit columns, not necessarily orthogonal
  Mat W;  // w_j = |lambda_j|^{1/p} v_j
  std::vector<double> signs;
  double max_residual = 0.0;
  int restarts_used = 0;
  bool success = false;

  double eval(const Vec& a) const;
};

struct FitParams {
  int restarts = 20;
  int max_iters = 300;
  double tol = 1e-6;
};

// Least squares over sum_j s_j (w_j^T a)^p by Levenberg-Marquardt from
// random starts.  Signs s_j are enumerated for even p.  Throws
// AlgorithmError ("fit failed") when no restart reaches max residual <= tol.
LowRankFit fit_lowrank_polynomial(const std::vector<Vec>& actions, const std::vector<double>& rewards,
                                  int k, int p, int d, Stream rng, const FitParams& prm = {});

// argmax over the unit ball of the fitted polynomial (multi-start projected
// gradient ascent).
Vec fitted_argmax(const LowRankFit& fit, Stream rng, int starts = 16);

enum class TieBreak { Adversarial, Lexicographic, Uniform };
TieBreak parse_tie_break(const std::string& s);
std::string to_string(TieBreak t);

struct HardCaseRun {
  int plays = 0;
  std::vector<int> played;  // vertex indices
  bool all_vertices = true;
  long long certificate_checks = 0;
  bool certificate_ok = true;
  int identified = -1;  // vertex index of the surviving model
};

// Optimistic play on the hard case.  UCB_t(a) = max over surviving models of
// their prediction; restricted to vertices after checking, on random interior
// points, that they score below 1 while a vertex scores 1.
HardCaseRun ucb_hard_case_run(int d, int p, const std::vector<int>& alpha_star, TieBreak tie,
                              Stream rng, int certificate_samples = 1000);

// min{T, 2 dim}.
double regret_bound_noiseless(double T, double dim);

struct IdentifyCommitResult {
  LowRankFit fit;
  Vec committed;
  long long exploration = 0;
  double held_out_error = 0.0;
  double regret = 0.0;
  double bound = 0.0;
};

// Plays T0 = 2dk + 1 ball-Gaussian actions, fits, commits to the fitted
// argmax for the remaining horizon.
IdentifyCommitResult identify_then_commit(BanditSession& s, long long T, std::uint64_t seed,
                                          const FitParams& prm = {}, int held_out = 200);

}  // namespace polybandit
