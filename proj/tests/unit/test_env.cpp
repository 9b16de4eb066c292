#include <doctest.h>

#include <cmath>
#include <memory>

#include "polybandit/env.hpp"
#include "polybandit/linalg.hpp"

using namespace polybandit;

namespace {

RewardModel rank1_sym(const Vec& v, double lambda, int p) {
  RewardModel m;
  m.kind = ModelKind::SYM;
  m.d = static_cast<int>(v.size());
  m.k = 1;
  m.p = p;
  m.lambdas = {lambda};
  m.frames = {v.normalized()};
  m.validate();
  return m;
}

Vec unit(int d, int i) { return Vec::Unit(d, i); }

}  // namespace

TEST_CASE("EV reward on aligned and orthogonal directions") {
  const RewardModel m = rank1_sym(unit(3, 0), 1.0, 2);
  RewardModel ev = m;
  ev.kind = ModelKind::EV;
  CHECK(eval_vec(ev, unit(3, 0)) == doctest::Approx(1.0));
  CHECK(eval_vec(ev, unit(3, 1)) == doctest::Approx(0.0));
}

TEST_CASE("SYM cubic contraction against a dense oracle") {
  Vec v(3);
  v << 1, 1, 0;
  const RewardModel m = rank1_sym(v, 0.8, 3);
  // 0.8 (v^T e1)^3 with v^T e1 = 1/sqrt 2.
  const double oracle = 0.8 * std::pow(1.0 / std::sqrt(2.0), 3);
  CHECK(eval_vec(m, unit(3, 0)) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(oracle == doctest::Approx(0.28284).epsilon(1e-4));
}

TEST_CASE("optimal rewards") {
  SUBCASE("LR diagonal") {
    RewardModel m;
    m.kind = ModelKind::LR;
    m.d = 4;
    m.k = 2;
    m.lambdas = {0.8, 0.6};
    Mat V = Mat::Zero(4, 2);
    V(1, 0) = 1;
    V(0, 1) = 1;
    m.frames = {V};
    m.validate();
    const Optimum o = optimal_reward(m);
    CHECK(o.r_star == doctest::Approx(1.0));
    Mat want = Mat::Zero(4, 4);
    want(0, 0) = 0.6;
    want(1, 1) = 0.8;
    CHECK((std::get<Mat>(o.action) - want).norm() < 1e-12);
  }
  SUBCASE("EV picks the top eigenvector") {
    const RewardModel m = make_random_model(ModelKind::EV, 5, 2, 2, {1.0, 0.5}, 3);
    const Optimum o = optimal_reward(m);
    CHECK(o.r_star == doctest::Approx(1.0));
    CHECK(std::abs(std::get<Vec>(o.action).dot(m.frames[0].col(0))) == doctest::Approx(1.0));
  }
  SUBCASE("ASYM with a negative top value flips one slot") {
    const RewardModel m = make_random_model(ModelKind::ASYM, 4, 1, 3, {-0.9}, 5);
    const Optimum o = optimal_reward(m);
    CHECK(o.r_star == doctest::Approx(0.9));
    CHECK(eval_mean(m, o.action) == doctest::Approx(0.9));
  }
}

TEST_CASE("random models are normalized and reproducible") {
  const RewardModel a = make_random_model(ModelKind::EV, 4, 1, 2, {1.0}, 7);
  const RewardModel b = make_random_model(ModelKind::EV, 4, 1, 2, {1.0}, 7);
  CHECK(a.frames[0].col(0).norm() == doctest::Approx(1.0));
  CHECK(model_to_json(a) == model_to_json(b));
  const RewardModel lr = make_random_model(ModelKind::LR, 8, 2, 2, {0.8, 0.6}, 1);
  CHECK(lr.matrix().norm() == doctest::Approx(1.0));
}

TEST_CASE("model JSON round trip") {
  const RewardModel a = make_random_model(ModelKind::SYM, 5, 2, 3, {}, 11);
  const RewardModel b = model_from_json(model_to_json(a));
  const Vec x = Vec::Constant(5, 0.3);
  CHECK(eval_vec(a, x) == doctest::Approx(eval_vec(b, x)).epsilon(1e-12));
}

TEST_CASE("EV reward is even in the action") {
  const RewardModel m = make_random_model(ModelKind::EV, 6, 3, 2, {}, 2);
  Stream rng(9);
  for (int i = 0; i < 100; ++i) {
    const Vec a = rng.ball_gaussian(6);
    CHECK(std::abs(eval_vec(m, a) - eval_vec(m, Vec(-a))) <= 1e-12);
  }
}

TEST_CASE("rewards on the unit ball are bounded by r*") {
  Stream rng(4);
  for (ModelKind kind : {ModelKind::EV, ModelKind::SYM, ModelKind::ASYM}) {
    const RewardModel m = make_random_model(kind, 5, 2, 3, {}, 21);
    const double r_star = optimal_reward(m).r_star;
    for (int i = 0; i < 10000; ++i) {
      double r;
      if (kind == ModelKind::ASYM) {
        std::vector<Vec> t;
        for (int q = 0; q < m.p; ++q) t.push_back(rng.unit_sphere(5) * rng.uniform());
        r = eval_tuple(m, t);
      } else {
        r = eval_vec(m, rng.unit_sphere(5) * rng.uniform());
      }
      REQUIRE(std::abs(r) <= r_star + 1e-12);
    }
  }
}

TEST_CASE("dense tensor contraction matches eval for small d and p") {
  Stream rng(13);
  for (int p = 2; p <= 4; ++p) {
    for (int d = 1; d <= 4; ++d) {
      const RewardModel m = make_random_model(ModelKind::SYM, d, 1, p, {}, 100 + p * 10 + d);
      const Vec a = rng.ball_gaussian(d);
      // Materialize sum_j lambda_j v_j^{(x)p} and contract with a^{(x)p}.
      const int n = static_cast<int>(std::pow(d, p));
      double dense = 0.0;
      for (int idx = 0; idx < n; ++idx) {
        int r = idx;
        double tv = 1.0, av = 1.0;
        for (int q = 0; q < p; ++q) {
          const int i = r % d;
          r /= d;
          tv *= m.frames[0](i, 0);
          av *= a[i];
        }
        dense += m.lambdas[0] * tv * av;
      }
      CHECK(std::abs(dense - eval_vec(m, a)) <= 1e-10);
    }
  }
}

TEST_CASE("invalid actions are rejected") {
  const RewardModel m = make_random_model(ModelKind::EV, 3, 1, 2, {1.0}, 1);
  CHECK_THROWS_AS(validate_action(m, Action(Vec(Vec::Constant(3, 1.0)))), InvalidAction);
  CHECK_THROWS_AS(validate_action(m, Action(Vec(Vec::Zero(4)))), InvalidAction);
  CHECK_THROWS_AS(make_random_model(ModelKind::EV, 3, 2, 2, {1.0, 0.0}, 1), ConfigError);
}

TEST_CASE("session pulls and ledger") {
  auto m = std::make_shared<const RewardModel>(make_random_model(ModelKind::EV, 4, 1, 2, {1.0}, 3));
  SUBCASE("noiseless pull equals the mean") {
    BanditSession s(m, 0.0, 1);
    const Vec a = Vec::Constant(4, 0.5);
    CHECK(s.pull_vec(a) == eval_vec(*m, a));
  }
  SUBCASE("optimal pulls add no regret") {
    BanditSession s(m, 0.5, 1);
    s.pull(s.optimal_action());
    s.pull(s.optimal_action());
    CHECK(s.ledger().cumulative_regret == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.t() == 2);
  }
  SUBCASE("unit noise averages out") {
    BanditSession s(m, 1.0, 2);
    const Vec a = Vec::Constant(4, 0.4);
    const double total = s.pull_repeated(a, 1'000'000);
    CHECK(std::abs(total / 1e6 - eval_vec(*m, a)) <= 3e-3);
  }
  SUBCASE("budget is enforced") {
    BanditSession s(m, 0.0, 1, 2);
    s.pull_vec(Vec::Zero(4));
    s.pull_vec(Vec::Zero(4));
    CHECK_THROWS_AS(s.pull_vec(Vec::Zero(4)), BudgetExhausted);
  }
}

TEST_CASE("hard-case vertices and hull points") {
  const auto v = hardcase_vertices(5, 2);
  CHECK(v.size() == 10);
  CHECK(v.front() == std::vector<int>{0, 1});
  CHECK(v.back() == std::vector<int>{3, 4});
  const RewardModel m = make_hardcase_model(5, 2, {1, 3});
  HullPoint h;
  h.weights = Vec::Zero(10);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] == std::vector<int>{1, 3}) h.weights[static_cast<Eigen::Index>(i)] = 1.0;
  CHECK(eval_hull(m, h) == doctest::Approx(1.0));
  h.weights.setZero();
  CHECK(eval_hull(m, h) == doctest::Approx(0.0));
}
