#include <doctest.h>

#include <cmath>
#include <memory>

#include "polybandit/baselines.hpp"

using namespace polybandit;

namespace {

std::shared_ptr<const RewardModel> rank1(int d, std::uint64_t seed) {
  return std::make_shared<const RewardModel>(make_random_model(ModelKind::EV, d, 1, 2, {1.0}, seed));
}

}  // namespace

TEST_CASE("pac to regret arithmetic") {
  const PacToRegret r = pac_to_regret(1.0, 2.0, 2, 16.0, 1.0);
  CHECK(r.zeta == doctest::Approx(std::pow(32.0, -0.25)).epsilon(1e-12));
  CHECK(r.zeta == doctest::Approx(0.42045).epsilon(1e-4));
  CHECK(r.T1 == doctest::Approx(std::sqrt(32.0)).epsilon(1e-12));
  CHECK(r.bound == doctest::Approx(4 * std::sqrt(2.0)).epsilon(1e-12));
  double prev = 1e9;
  for (double T = 10; T < 1e9; T *= 10) {
    const double z = pac_to_regret(1.0, 2.0, 2, T, 1.0).zeta;
    CHECK(z < prev);
    prev = z;
  }
}

TEST_CASE("pac to regret against independent long-double arithmetic") {
  Stream rng(3);
  for (int i = 0; i < 100; ++i) {
    const long double A = 0.1L + 10 * rng.uniform();
    const long double a = 0.5L + 3 * rng.uniform();
    const int p = 2 + static_cast<int>(rng() % 4);
    const long double T = 100.0L + 1e6L * rng.uniform();
    const long double r = 0.2L + rng.uniform();
    const PacToRegret got = pac_to_regret(double(A), double(a), p, double(T), double(r));
    const long double zeta = std::pow(A / (T * p), 1.0L / (a + 2));
    const long double T1 = A * std::pow(zeta, -a);
    const long double bound =
        std::pow(T, a / (a + 2)) * std::pow((long double)p, a / (a + 2)) * std::pow(A, 2 / (a + 2)) * r;
    CHECK(got.zeta == doctest::Approx(double(zeta)).epsilon(1e-12));
    CHECK(got.T1 == doctest::Approx(double(T1)).epsilon(1e-12));
    CHECK(got.bound == doctest::Approx(double(bound)).epsilon(1e-12));
  }
}

TEST_CASE("finite UCB") {
  auto m = rank1(3, 1);
  SUBCASE("single arm") {
    BanditSession s(m, 0.1, 1);
    const Vec a = Vec::Constant(3, 0.3);
    run_finite_ucb(s, {Action(a)}, 50, 0.1);
    CHECK(s.ledger().cumulative_regret == doctest::Approx(50 * (1 - eval_vec(*m, a))));
  }
  SUBCASE("every arm once before any repeat") {
    BanditSession s(m, 0.1, 1);
    std::vector<Action> arms;
    for (int i = 0; i < 3; ++i) arms.push_back(Vec(Vec::Unit(3, i) * 0.5));
    const FiniteUcbResult r = run_finite_ucb(s, arms, 3, 0.1);
    for (long long c : r.stats.counts) CHECK(c == 1);
  }
  SUBCASE("identical arms add no regret from arm choice") {
    BanditSession s(m, 0.1, 1);
    const Action opt = s.optimal_action();
    run_finite_ucb(s, {opt, opt}, 100, 0.1);
    CHECK(s.ledger().cumulative_regret == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("empty pool") {
    BanditSession s(m, 0.1, 1);
    CHECK_THROWS_AS(candidate_set_etc(s, {}, 10), ConfigError);
  }
}

TEST_CASE("two arms with gap 0.5 under unit noise") {
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    RewardModel lin;
    lin.kind = ModelKind::EV;
    lin.d = 2;
    lin.k = 1;
    lin.lambdas = {1.0};
    lin.frames = {Mat::Identity(2, 1)};
    auto m = std::make_shared<const RewardModel>(lin);
    BanditSession s(m, 1.0, seed);
    const Vec best = Vec::Unit(2, 0);
    const Vec worse = Vec::Unit(2, 0) * std::sqrt(0.5);
    const FiniteUcbResult r = run_finite_ucb(s, {Action(best), Action(worse)}, 10000, 0.1);
    good += r.stats.counts[1] <= 200;
  }
  CHECK(good >= 95);
}

TEST_CASE("symmetric lift preserves inner products") {
  Stream rng(2);
  for (int p = 1; p <= 3; ++p) {
    const Vec a = rng.ball_gaussian(4), b = rng.ball_gaussian(4);
    CHECK(symmetric_lift(a, p).dot(symmetric_lift(b, p)) ==
          doctest::Approx(std::pow(1 + a.dot(b), p)).epsilon(1e-12));
  }
  const RewardModel m = make_random_model(ModelKind::EV, 4, 2, 2, {}, 5);
  const Vec theta = lift_parameter(m, 2);
  const Vec a = rng.ball_gaussian(4);
  CHECK(symmetric_lift(a, 2).dot(theta) == doctest::Approx(eval_vec(m, a)).epsilon(1e-12));
  CHECK((lifted_quadratic_matrix(theta, 4) - m.matrix()).norm() <= 1e-12);
}

TEST_CASE("noiseless LinUCB finds the top eigenvector") {
  auto m = rank1(3, 4);
  BanditSession s(m, 0.0, 4);
  LinUcbParams prm;
  prm.T = 3000;
  prm.stop_eps = 0.05;
  const LinUcbResult r = run_lin_ucb_vectorized(s, prm, 4);
  CHECK(r.samples_to_eps > 0);
  CHECK(r.feature_dim == 10);
  CHECK(r.grid == 20);
}

TEST_CASE("LinUCB confidence set covers the parameter") {
  auto m = rank1(3, 6);
  BanditSession s(m, 0.1, 6);
  LinUcbParams prm;
  prm.T = 2000;
  prm.audit_every = 20;
  const LinUcbResult r = run_lin_ucb_vectorized(s, prm, 6);
  REQUIRE(r.audits > 0);
  CHECK(static_cast<double>(r.covered) / r.audits >= 0.9);
}

TEST_CASE("ETC tuning") {
  // S(eps) = 100 / eps^2 on T = 1e6: the optimum balances both terms.
  auto S = [](double e) { return 100.0 / (e * e); };
  const EtcPlan plan = tune_etc(S, 2, 1e6, 1.0);
  CHECK(plan.exploration <= 1e6);
  CHECK(plan.bound <= 1e6);
  const double lo = S(plan.eps) + (1e6 - S(plan.eps)) * 2 * plan.eps * plan.eps;
  CHECK(plan.bound == doctest::Approx(lo));
  // Nothing fits in a tiny horizon.
  const EtcPlan none = tune_etc(S, 2, 10, 1.0);
  CHECK(none.bound == doctest::Approx(10.0));
}
