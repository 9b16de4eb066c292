#include "polybandit/noiseless.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polybandit/linalg.hpp"

namespace polybandit {

namespace {

constexpr double kIdentifyTol = 1e-9;

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

double product_over(const Vec& x, const std::vector<int>& alpha) {
  double f = 1.0;
  for (int i : alpha) f *= x[i];
  return f;
}

}  // namespace

Vec tensorize(const Vec& a, int p, long long cap) {
  if (p < 0) throw ConfigError("tensor power must be nonnegative");
  if (!a.allFinite()) throw ConfigError("tensorize needs finite entries");
  const long long n = a.size() + 1;
  double size = 1.0;
  for (int i = 0; i < p; ++i) size *= static_cast<double>(n);
  if (size > static_cast<double>(cap))
    throw ConfigError("tensorized dimension " + std::to_string(static_cast<long long>(size)) +
                      " exceeds the cap");
  Vec at(n);
  at[0] = 1.0;
  at.tail(n - 1) = a;
  Vec X(1);
  X[0] = 1.0;
  for (int i = 0; i < p; ++i) {
    Vec next(X.size() * n);
    for (Eigen::Index r = 0; r < X.size(); ++r) next.segment(r * n, n) = X[r] * at;
    X = std::move(next);
  }
  return X;
}

HullPoint random_hull_point(Stream& rng, int num_vertices) {
  // Flat Dirichlet over the vertices plus the origin.
  std::exponential_distribution<double> ex(1.0);
  Vec w(num_vertices);
  double total = 0.0;
  for (int i = 0; i < num_vertices; ++i) {
    w[i] = ex(rng);
    total += w[i];
  }
  total += ex(rng);
  HullPoint h;
  h.weights = w / total;
  return h;
}

IdentifyResult identify_finite_class(BanditSession& s, Stream rng, int max_actions) {
  const RewardModel& m = s.model();
  if (m.kind != ModelKind::HARDCASE) throw ConfigError("identification needs a HARDCASE session");
  if (s.sigma() > 0.0) throw ConfigError("exact identification needs noiseless rewards");
  const auto verts = hardcase_vertices(m.d, m.p);
  const int cap = max_actions > 0 ? max_actions : 10 * m.d;
  std::vector<int> alive(verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) alive[i] = static_cast<int>(i);
  IdentifyResult res;
  while (alive.size() > 1) {
    if (res.actions_used >= cap)
      throw AlgorithmError("model class not separated after " + std::to_string(cap) + " actions");
    const HullPoint h = random_hull_point(rng, static_cast<int>(verts.size()));
    const double r = s.pull_hull(h);
    ++res.actions_used;
    const Vec x = hull_to_dense(h, m.d, m.p);
    std::vector<int> keep;
    for (int i : alive)
      if (std::abs(product_over(x, verts[i]) - r) <= kIdentifyTol) keep.push_back(i);
    alive = std::move(keep);
  }
  if (alive.empty()) throw AlgorithmError("every model was eliminated");
  res.alpha = verts[alive[0]];
  return res;
}

double LowRankFit::eval(const Vec& a) const {
  double f = 0.0;
  for (Eigen::Index j = 0; j < W.cols(); ++j) f += signs[j] * ipow(W.col(j).dot(a), p);
  return f;
}

namespace {

struct LmState {
  Mat W;
  double cost = 0.0;
  double max_res = 0.0;
};

void residuals(const Mat& A, const Vec& y, const Mat& W, const std::vector<double>& sg, int p,
               Vec& r) {
  const Mat P = A.transpose() * W;  // T x k projections
  r = -y;
  for (Eigen::Index j = 0; j < W.cols(); ++j)
    for (Eigen::Index t = 0; t < A.cols(); ++t) r[t] += sg[j] * ipow(P(t, j), p);
}

LmState levenberg_marquardt(const Mat& A, const Vec& y, Mat W, const std::vector<double>& sg,
                            int p, const FitParams& prm) {
  const int d = static_cast<int>(W.rows());
  const int k = static_cast<int>(W.cols());
  const int T = static_cast<int>(A.cols());
  const int np = d * k;
  Vec r;
  residuals(A, y, W, sg, p, r);
  double cost = r.squaredNorm();
  double mu = 1e-3;
  Mat J(T, np);
  for (int it = 0; it < prm.max_iters; ++it) {
    if (r.cwiseAbs().maxCoeff() <= prm.tol * 1e-3) break;
    const Mat P = A.transpose() * W;
    for (int j = 0; j < k; ++j)
      for (int t = 0; t < T; ++t)
        J.block(t, j * d, 1, d) = (sg[j] * p * ipow(P(t, j), p - 1)) * A.col(t).transpose();
    const Mat JtJ = J.transpose() * J;
    const Vec g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 12; ++tries) {
      Mat H = JtJ;
      H.diagonal().array() += mu * (JtJ.diagonal().array() + 1e-12);
      const Vec step = H.ldlt().solve(-g);
      Mat Wn = W;
      for (int j = 0; j < k; ++j) Wn.col(j) += step.segment(j * d, d);
      Vec rn;
      residuals(A, y, Wn, sg, p, rn);
      const double cn = rn.squaredNorm();
      if (std::isfinite(cn) && cn < cost) {
        W = Wn;
        r = rn;
        cost = cn;
        mu = std::max(mu / 3.0, 1e-15);
        improved = true;
        break;
      }
      mu *= 4.0;
    }
    if (!improved) break;
  }
  LmState out;
  out.W = W;
  out.cost = cost;
  out.max_res = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  return out;
}

}  // namespace

LowRankFit fit_lowrank_polynomial(const std::vector<Vec>& actions, const std::vector<double>& rewards,
                                  int k, int p, int d, Stream rng, const FitParams& prm) {
  if (actions.size() != rewards.size()) throw ConfigError("actions and rewards differ in length");
  if (k < 1 || p < 1 || d < 1) throw ConfigError("fit needs k, p, d >= 1");
  const int T = static_cast<int>(actions.size());
  Mat A(d, T);
  Vec y(T);
  for (int t = 0; t < T; ++t) {
    if (actions[t].size() != d) throw ConfigError("action dimension mismatch");
    A.col(t) = actions[t];
    y[t] = rewards[t];
  }
  LowRankFit best;
  best.p = p;
  best.max_residual = std::numeric_limits<double>::infinity();
  const double yscale = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
  if (yscale == 0.0) {
    // All-zero rewards: the zero polynomial fits exactly.
    best.W = Mat::Zero(d, k);
    best.V = Mat::Zero(d, k);
    best.V.row(0).setOnes();
    best.lambdas.assign(k, 0.0);
    best.signs.assign(k, 1.0);
    best.max_residual = 0.0;
    best.success = true;
    return best;
  }
  const int patterns = (p % 2 == 0) ? (1 << std::min(k, 10)) : 1;
  for (int rs = 0; rs < prm.restarts; ++rs) {
    std::vector<double> sg(k, 1.0);
    if (p % 2 == 0) {
      const int pat = rs % patterns;
      for (int j = 0; j < k; ++j) sg[j] = ((pat >> j) & 1) ? -1.0 : 1.0;
    }
    Mat W0(d, k);
    for (int j = 0; j < k; ++j) W0.col(j) = rng.unit_sphere(d);
    const LmState st = levenberg_marquardt(A, y, W0, sg, p, prm);
    best.restarts_used = rs + 1;
    if (st.max_res < best.max_residual) {
      best.W = st.W;
      best.signs = sg;
      best.max_residual = st.max_res;
    }
    if (best.max_residual <= prm.tol) break;
  }
  best.success = best.max_residual <= prm.tol;
  best.V = best.W;
  best.lambdas.assign(k, 0.0);
  for (int j = 0; j < k; ++j) {
    const double nw = best.W.col(j).norm();
    best.lambdas[j] = best.signs[j] * ipow(nw, p);
    if (nw > 0.0) best.V.col(j) /= nw;
  }
  if (!best.success)
    throw AlgorithmError("fit failed: residual " + std::to_string(best.max_residual) +
                         " after " + std::to_string(best.restarts_used) + " restarts");
  return best;
}

Vec fitted_argmax(const LowRankFit& fit, Stream rng, int starts) {
  const int d = static_cast<int>(fit.W.rows());
  const int p = fit.p;
  auto grad = [&](const Vec& a) {
    Vec g = Vec::Zero(d);
    for (Eigen::Index j = 0; j < fit.W.cols(); ++j)
      g += fit.signs[j] * p * ipow(fit.W.col(j).dot(a), p - 1) * fit.W.col(j);
    return g;
  };
  std::vector<Vec> init;
  for (Eigen::Index j = 0; j < fit.W.cols(); ++j) {
    if (fit.V.col(j).norm() > 0.0) {
      init.push_back(fit.V.col(j));
      init.push_back(-fit.V.col(j));
    }
  }
  for (int i = 0; i < starts; ++i) init.push_back(rng.unit_sphere(d));
  Vec best = Vec::Zero(d);
  double best_val = 0.0;  // the origin is feasible
  for (Vec a : init) {
    double val = fit.eval(a);
    double step = 0.5;
    for (int it = 0; it < 500 && step > 1e-14; ++it) {
      const Vec g = grad(a);
      const Vec tang = g - g.dot(a) * a;
      if (tang.norm() < 1e-13) break;
      Vec cand = a + step * tang;
      cand.normalize();
      const double cv = fit.eval(cand);
      if (cv > val) {
        a = cand;
        val = cv;
        step = std::min(step * 1.5, 4.0);
      } else {
        step *= 0.5;
      }
    }
    if (val > best_val) {
      best_val = val;
      best = a;
    }
  }
  return best;
}

TieBreak parse_tie_break(const std::string& s) {
  if (s == "adversarial") return TieBreak::Adversarial;
  if (s == "lex") return TieBreak::Lexicographic;
  if (s == "uniform") return TieBreak::Uniform;
  throw ConfigError("unknown tie-break '" + s + "' (adversarial|lex|uniform)");
}

std::string to_string(TieBreak t) {
  switch (t) {
    case TieBreak::Adversarial: return "adversarial";
    case TieBreak::Lexicographic: return "lex";
    case TieBreak::Uniform: return "uniform";
  }
  return "?";
}

HardCaseRun ucb_hard_case_run(int d, int p, const std::vector<int>& alpha_star, TieBreak tie,
                              Stream rng, int certificate_samples) {
  const RewardModel model = make_hardcase_model(d, p, alpha_star);
  const auto verts = hardcase_vertices(d, p);
  const int N = static_cast<int>(verts.size());
  const int star = static_cast<int>(std::find(verts.begin(), verts.end(), alpha_star) - verts.begin());
  HardCaseRun res;
  std::vector<char> alive(N, 1);
  int n_alive = N;

  // Interior points score below 1 under every surviving model while each
  // surviving vertex scores exactly 1 under its own model.  C_t only shrinks,
  // so checking C_0 covers every later round.
  for (int c = 0; c < certificate_samples; ++c) {
    HullPoint h;
    if (c % 2 == 0 || N < 2) {
      h = random_hull_point(rng, N);
    } else {
      h.weights = Vec::Zero(N);
      const int i = static_cast<int>(rng() % N);
      int j = static_cast<int>(rng() % (N - 1));
      if (j >= i) ++j;
      const double w = 0.001 + 0.998 * rng.uniform();
      h.weights[i] = w;
      h.weights[j] = 1.0 - w;
    }
    const Vec x = hull_to_dense(h, d, p);
    double ucb = 0.0;
    for (int b = 0; b < N; ++b)
      if (alive[b]) ucb = std::max(ucb, product_over(x, verts[b]));
    ++res.certificate_checks;
    if (!(ucb < 1.0)) res.certificate_ok = false;
  }

  std::vector<int> order;
  while (n_alive > 1) {
    // Every surviving vertex has UCB exactly 1; others have 0.
    int pick = -1;
    switch (tie) {
      case TieBreak::Lexicographic:
        for (int b = 0; b < N && pick < 0; ++b)
          if (alive[b]) pick = b;
        break;
      case TieBreak::Adversarial:
        for (int b = 0; b < N && pick < 0; ++b)
          if (alive[b] && b != star) pick = b;
        if (pick < 0) pick = star;
        break;
      case TieBreak::Uniform: {
        int r = static_cast<int>(rng() % static_cast<std::uint64_t>(n_alive));
        for (int b = 0; b < N; ++b) {
          if (!alive[b]) continue;
          if (r-- == 0) {
            pick = b;
            break;
          }
        }
        break;
      }
    }
    HullPoint h;
    h.weights = Vec::Zero(N);
    h.weights[pick] = 1.0;
    const bool vertex = (h.weights.array() == 1.0).count() == 1 &&
                        (h.weights.array() == 0.0).count() == N - 1;
    if (!vertex) res.all_vertices = false;
    const double r = eval_hull(model, h);
    res.played.push_back(pick);
    ++res.plays;
    // Consistency update: model b predicts [b == pick] on a vertex.
    for (int b = 0; b < N; ++b) {
      if (!alive[b]) continue;
      const double pred = b == pick ? 1.0 : 0.0;
      if (std::abs(pred - r) > kIdentifyTol) {
        alive[b] = 0;
        --n_alive;
      }
    }
    if (!alive[star]) throw AlgorithmError("ground truth eliminated");
  }
  res.identified = star;
  for (int b = 0; b < N; ++b)
    if (alive[b]) res.identified = b;
  return res;
}

double regret_bound_noiseless(double T, double dim) { return std::min(T, 2.0 * dim); }

IdentifyCommitResult identify_then_commit(BanditSession& s, long long T, std::uint64_t seed,
                                          const FitParams& prm, int held_out) {
  const RewardModel& m = s.model();
  if (m.kind != ModelKind::POLY_LOWRANK && m.kind != ModelKind::SYM)
    throw ConfigError("identify-then-commit needs a POLY-LOWRANK model");
  const int d = m.d, k = m.k, p = m.p;
  IdentifyCommitResult out;
  out.bound = regret_bound_noiseless(static_cast<double>(T), static_cast<double>(d) * k);
  const long long T0 = std::min<long long>(T, 2LL * d * k + 1);
  Stream act = Stream::derive(seed, StreamTag::Noiseless, 0);
  std::vector<Vec> actions;
  std::vector<double> rewards;
  s.set_phase("identify");
  for (long long t = 0; t < T0; ++t) {
    actions.push_back(act.ball_gaussian(d));
    rewards.push_back(s.pull_vec(actions.back()));
  }
  out.exploration = T0;
  out.fit = fit_lowrank_polynomial(actions, rewards, k, p, d,
                                   Stream::derive(seed, StreamTag::Noiseless, 1), prm);
  Stream ho = Stream::derive(seed, StreamTag::Noiseless, 2);
  for (int i = 0; i < held_out; ++i) {
    const Vec a = ho.ball_gaussian(d);
    out.held_out_error = std::max(out.held_out_error, std::abs(out.fit.eval(a) - eval_vec(m, a)));
  }
  out.committed = fitted_argmax(out.fit, Stream::derive(seed, StreamTag::Noiseless, 3));
  if (T > T0) {
    s.set_phase("commit");
    s.pull_repeated(Action(out.committed), T - T0);
  }
  s.flush_trace();
  out.regret = s.ledger().cumulative_regret;
  return out;
}

}  // namespace polybandit
