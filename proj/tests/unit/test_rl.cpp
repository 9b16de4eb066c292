#include <doctest.h>

#include <cmath>

#include "polybandit/linalg.hpp"
#include "polybandit/rl.hpp"

using namespace polybandit;

TEST_CASE("Bellman images of the optimal values match the optimal Q matrices") {
  const QuadraticMDP mdp = make_bellman_complete_mdp(6, 2, 3, 5);
  const std::vector<Mat> Q = optimal_q_matrices(mdp);
  REQUIRE(Q.size() == 3);
  for (int h = 0; h + 1 < 3; ++h) {
    const Mat back = mdp.bellman_image(h, mdp.greedy_values(Q[h + 1]));
    CHECK((back - Q[h]).cwiseAbs().maxCoeff() <= 1e-10);
  }
  CHECK((Q[2] - mdp.reward_matrix(2)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("optimal Q matrices stay rank k with bounded condition") {
  const QuadraticMDP mdp = make_bellman_complete_mdp(8, 2, 4, 9);
  for (const Mat& M : optimal_q_matrices(mdp)) {
    const SymEig e = sym_eig(M);
    int rank = 0;
    for (int i = 0; i < e.values.size(); ++i) rank += std::abs(e.values[i]) > 1e-10;
    CHECK(rank <= 2);
  }
  CHECK(mdp.kappa >= 1.0);
}

TEST_CASE("transitions are sub-stochastic") {
  const QuadraticMDP mdp = make_bellman_complete_mdp(5, 1, 2, 3);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const Vec p = mdp.transition(0, mdp.features[s][a]);
      CHECK(p.minCoeff() >= -1e-12);
      CHECK(p.sum() <= 1.0 + 1e-12);
    }
}

TEST_CASE("the optimal policy attains the optimal value") {
  const QuadraticMDP mdp = make_bellman_complete_mdp(6, 1, 3, 2);
  const std::vector<Mat> Q = optimal_q_matrices(mdp);
  std::vector<std::vector<int>> pi;
  for (const Mat& M : Q) pi.push_back(mdp.greedy_policy(M));
  CHECK((policy_value(mdp, pi) - optimal_value(mdp)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("noiseless two-stage recovery") {
  const int d = 6;
  Mat M = Mat::Zero(d, d);
  M(0, 0) = 0.9;
  M(1, 1) = 0.4;
  const QuadraticOracle oracle = [&](const Vec& a) { return a.dot(M * a); };
  RecoverParams prm;
  prm.mode = EstimatorMode::Exact;
  const RecoverResult r = recover_quadratic_matrix(oracle, d, 2, 1e-3, 0.1, prm, Stream(1));
  CHECK(spectral_norm(r.M - M) <= 1e-6);
}

TEST_CASE("zero matrix recovers to zero") {
  const QuadraticOracle oracle = [](const Vec&) { return 0.0; };
  RecoverParams prm;
  prm.mode = EstimatorMode::Exact;
  const RecoverResult r = recover_quadratic_matrix(oracle, 4, 1, 1e-3, 0.1, prm, Stream(2));
  CHECK(r.M.norm() <= 1e-12);
}

TEST_CASE("policy learning at calibrated constants meets the per-level contract") {
  const QuadraticMDP mdp = make_bellman_complete_mdp(8, 1, 2, 4);
  RecoverParams prm;
  prm.C_n = 0.015;
  prm.C_m = 0.5;
  prm.C_L = 1.0;
  prm.kappa = mdp.kappa;
  const PolicyResult r = learn_policy(mdp, 0.1, 0.1, prm, 4);
  REQUIRE(r.levels.size() == 2);
  CHECK(r.max_level_error <= 0.1 / 2);
  // Level errors below eps/H bound the value error on the core by eps.
  for (const LevelRecord& rec : r.levels) CHECK(rec.value_gap <= 0.1);
  CHECK(r.value_gap <= 0.1);
}

TEST_CASE("generative oracle noise is centered") {
  const QuadraticMDP mdp = make_bellman_complete_mdp(4, 1, 2, 6);
  const Vec v_next = mdp.greedy_values(optimal_q_matrices(mdp)[1]);
  GenerativeOracle g(mdp, 0, v_next, Stream(3));
  const Vec phi = mdp.features[0][0];
  const double mean = phi.dot(g.target() * phi);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double y = g(phi);
    sum += y;
    sq += y * y;
  }
  const double mu = sum / n;
  const double sd = std::sqrt(sq / n - mu * mu);
  CHECK(std::abs(mu - mean) <= 3 * sd / std::sqrt(double(n)) + 1e-12);
  CHECK(g.queries() == n);
}
