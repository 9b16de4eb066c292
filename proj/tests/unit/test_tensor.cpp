#include <doctest.h>

#include <cmath>
#include <memory>

#include "polybandit/linalg.hpp"
#include "polybandit/tensor.hpp"
#include "polybandit/zorder.hpp"

using namespace polybandit;

TEST_CASE("angle to regret") {
  CHECK(angle_to_regret(0.0, 3, 1.0) == 0.0);
  CHECK(angle_to_regret(10.0, 3, 0.7) == doctest::Approx(1.4));
  CHECK(angle_to_regret(0.1, 2, 1.0) == doctest::Approx(0.02));
}

TEST_CASE("candidate admissibility") {
  const RewardModel one = make_random_model(ModelKind::SYM, 1, 1, 3, {1.0}, 1);
  const CandidatePool pool = init_candidates(Stream(3), 1, 1, 0.1, 4.0, 6);
  REQUIRE(pool.actions.size() == 6);
  for (const Vec& a : pool.actions) {
    CHECK(std::abs(a[0]) == doctest::Approx(1.0));
    CHECK(good_initial_candidate(one, a));
  }
}

TEST_CASE("some of 64 candidates is admissible in d = 6") {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const RewardModel m = make_random_model(ModelKind::SYM, 6, 1, 3, {1.0}, seed);
    const CandidatePool pool = init_candidates(Stream(seed), 6, 1, 0.1, 4.0, 64);
    bool any = false;
    for (const Vec& a : pool.actions) any = any || good_initial_candidate(m, a);
    hits += any;
  }
  CHECK(hits >= 180);
}

TEST_CASE("schedule helpers") {
  CHECK(phased_stage_count(0.25, 1.0) == 3);
  CHECK(phased_inner_steps(6) == static_cast<int>(std::ceil(2 * std::log(12.0))));
  const long long n8 = burn_in_phase2_batch(8, 0.01, 1.0, 0.1, 1e4);
  const long long n4 = burn_in_phase2_batch(4, 0.01, 1.0, 0.1, 1e4);
  CHECK(static_cast<double>(n8) / n4 == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(burn_in_phase2_eps(6, 1, 3, 1.0, 1, 100.0) <= 1.0 / 3 + 1e-15);
  CHECK(alternating_pool_size(1, 3, 0.1, 64) == 64);
}

TEST_CASE("one exact update lands on v1 for rank-1 models") {
  Stream rng(5);
  for (int p = 3; p <= 5; ++p) {
    const RewardModel m = make_random_model(ModelKind::SYM, 7, 1, p, {0.9}, 10 + p);
    Vec a = rng.unit_sphere(7);
    if (a.dot(m.frames[0].col(0)) < 0) a = -a;
    const Vec g = closed_form_G(m, a, p, 20.0);
    CHECK(tan_theta(g / g.norm(), m.frames[0].col(0)) <= 1e-10);
  }
}

TEST_CASE("angle-to-regret inequality on even-p rank-1 models") {
  Stream rng(8);
  for (int p : {2, 4}) {
    const RewardModel m = make_random_model(ModelKind::SYM, 5, 1, p, {0.8}, 3 + p);
    const Vec& v = m.frames[0].col(0);
    for (int i = 0; i < 10000; ++i) {
      const Vec a = rng.unit_sphere(5);
      const double gap = 0.8 - eval_vec(m, a);
      REQUIRE(gap == doctest::Approx(0.8 * (1 - std::pow(std::abs(v.dot(a)), p))).epsilon(1e-10));
      REQUIRE(gap <= angle_to_regret(tan_theta(a, v), p, 0.8) + 1e-12);
    }
  }
}

TEST_CASE("noiseless phased elimination keeps an aligned candidate") {
  auto m = std::make_shared<const RewardModel>(
      make_random_model(ModelKind::SYM, 5, 1, 3, {1.0}, 4));
  BanditSession s(m, 0.0, 4);
  PhasedParams prm;
  prm.p = 3;
  prm.eps = 0.1;
  prm.mode = EstimatorMode::Exact;
  prm.L0_override = 16;
  prm.n_override = 10;
  const PhasedResult r = run_phased_elimination(s, prm, 4);
  double best = 0;
  for (const Vec& a : r.pool.actions) {
    CHECK(std::abs(a.norm() - 1.0) <= 1e-12);
    best = std::max(best, m->frames[0].col(0).dot(a));
  }
  CHECK(best >= 0.99);
  CHECK(r.pool.actions.size() <= 16);
}

TEST_CASE("slot contraction matches the reward") {
  const RewardModel m = make_random_model(ModelKind::ASYM, 4, 2, 3, {}, 6);
  Stream rng(2);
  std::vector<Vec> a;
  for (int q = 0; q < 3; ++q) a.push_back(rng.unit_sphere(4));
  for (int q = 0; q < 3; ++q)
    CHECK(slot_contraction(m, a, q).dot(a[q]) == doctest::Approx(eval_tuple(m, a)).epsilon(1e-12));
}

TEST_CASE("slot estimator is unbiased") {
  auto m = std::make_shared<const RewardModel>(
      make_random_model(ModelKind::ASYM, 3, 1, 3, {1.0}, 7));
  BanditSession s(m, 0.05, 7);
  Stream rng(3);
  std::vector<Vec> a;
  for (int q = 0; q < 3; ++q) a.push_back(rng.unit_sphere(3));
  const Vec want = slot_contraction(*m, a, 1);
  const int R = 30;
  Vec mean = Vec::Zero(3), sq = Vec::Zero(3);
  for (int r = 0; r < R; ++r) {
    const Vec y = estimate_slot(s, a, 1, 4000, 30.0, Stream(50 + r)) - want;
    mean += y;
    sq += y.cwiseProduct(y);
  }
  mean /= R;
  const Vec sd = ((sq / R - mean.cwiseProduct(mean)) * R / (R - 1)).cwiseSqrt();
  for (int i = 0; i < 3; ++i) CHECK(std::abs(mean[i]) <= 3 * sd[i] / std::sqrt(double(R)));
}
