#include "polybandit/rl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polybandit/linalg.hpp"
#include "polybandit/zorder.hpp"

namespace polybandit {

namespace {

long long ceil_count(double x) {
  if (!(x >= 1.0)) return 1;
  if (x > 9.0e18) throw ConfigError("batch size overflows");
  return static_cast<long long>(std::ceil(x));
}

// Top-k eigenvectors of a symmetric matrix ordered by |eigenvalue|.
Mat top_k_by_magnitude(const Mat& S, int k) {
  const SymEig e = sym_eig(S);
  std::vector<int> idx(e.values.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return std::abs(e.values[a]) > std::abs(e.values[b]); });
  Mat X(S.rows(), k);
  for (int j = 0; j < k; ++j) X.col(j) = e.vectors.col(idx[j]);
  return X;
}

}  // namespace

Mat QuadraticMDP::reward_matrix(int h) const {
  return U[h] * rho[h].asDiagonal() * U[h].transpose();
}

Mat QuadraticMDP::psi(int h, int s_next) const {
  return U[h] * D[h].col(s_next).asDiagonal() * U[h].transpose();
}

Vec QuadraticMDP::transition(int h, const Vec& phi) const {
  const Vec c = U[h].transpose() * phi;
  const Vec c2 = c.array().square().matrix();
  Vec q = D[h].transpose() * c2;
  return q.cwiseMax(0.0);
}

Mat QuadraticMDP::bellman_image(int h, const Vec& v_next) const {
  if (v_next.size() != n_states) throw ConfigError("value vector has wrong length");
  const Vec diag = rho[h] + D[h] * v_next;
  return U[h] * diag.asDiagonal() * U[h].transpose();
}

Vec QuadraticMDP::greedy_values(const Mat& Q) const {
  Vec v(n_states);
  for (int s = 0; s < n_states; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (const Vec& phi : features[s]) best = std::max(best, phi.dot(Q * phi));
    v[s] = best;
  }
  return v;
}

std::vector<int> QuadraticMDP::greedy_policy(const Mat& Q) const {
  std::vector<int> pi(n_states, 0);
  for (int s = 0; s < n_states; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_actions; ++a) {
      const double q = features[s][a].dot(Q * features[s][a]);
      if (q > best) {
        best = q;
        pi[s] = a;
      }
    }
  }
  return pi;
}

QuadraticMDP make_bellman_complete_mdp(int d, int k, int H, std::uint64_t seed, int n_states,
                                       int n_actions) {
  if (k < 1 || k > d) throw ConfigError("MDP needs 1 <= k <= d");
  if (H < 1) throw ConfigError("horizon must be positive");
  if (n_states < 1 || n_actions < 1) throw ConfigError("MDP needs states and actions");
  QuadraticMDP mdp;
  mdp.H = H;
  mdp.d = d;
  mdp.k = k;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  Stream rng = Stream::derive(seed, StreamTag::Rl, 0);
  mdp.features.assign(n_states, {});
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a)
      mdp.features[s].push_back(rng.unit_sphere(d) * (0.6 + 0.4 * rng.uniform()));
  std::exponential_distribution<double> ex(1.0);
  for (int h = 0; h < H; ++h) {
    mdp.U.push_back(random_orthonormal(d, k, rng));
    Vec rho(k);
    for (int j = 0; j < k; ++j) rho[j] = 0.2 + 0.3 * rng.uniform();
    mdp.rho.push_back(rho);
    // Each row of D sums to tau_j <= 0.9, so core mass <= 0.9 |phi|^2 <= 0.9.
    Mat Dh(k, n_states);
    for (int j = 0; j < k; ++j) {
      double total = 0.0;
      for (int s = 0; s < n_states; ++s) {
        Dh(j, s) = ex(rng);
        total += Dh(j, s);
      }
      const double tau = 0.5 + 0.4 * rng.uniform();
      Dh.row(j) *= tau / total;
    }
    mdp.D.push_back(Dh);
  }
  const std::vector<Mat> Q = optimal_q_matrices(mdp);
  mdp.kappa = 1.0;
  for (int h = 0; h < H; ++h) {
    const Vec diag = (mdp.U[h].transpose() * Q[h] * mdp.U[h]).diagonal();
    mdp.kappa = std::max(mdp.kappa, diag.cwiseAbs().maxCoeff() / diag.cwiseAbs().minCoeff());
  }
  return mdp;
}

std::vector<Mat> optimal_q_matrices(const QuadraticMDP& mdp) {
  std::vector<Mat> Q(mdp.H);
  Vec v = Vec::Zero(mdp.n_states);
  for (int h = mdp.H - 1; h >= 0; --h) {
    Q[h] = mdp.bellman_image(h, v);
    v = mdp.greedy_values(Q[h]);
  }
  return Q;
}

Vec optimal_value(const QuadraticMDP& mdp) {
  const std::vector<Mat> Q = optimal_q_matrices(mdp);
  return mdp.greedy_values(Q[0]);
}

Vec policy_value(const QuadraticMDP& mdp, const std::vector<std::vector<int>>& policy) {
  if (static_cast<int>(policy.size()) != mdp.H) throw ConfigError("policy needs H levels");
  Vec v = Vec::Zero(mdp.n_states);
  for (int h = mdp.H - 1; h >= 0; --h) {
    const Mat M = mdp.bellman_image(h, v);
    Vec nv(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
      const Vec& phi = mdp.features[s][policy[h][s]];
      nv[s] = phi.dot(M * phi);
    }
    v = nv;
  }
  return v;
}

GenerativeOracle::GenerativeOracle(const QuadraticMDP& mdp, int h, Vec v_next, Stream rng)
    : mdp_(mdp), h_(h), v_next_(std::move(v_next)), rng_(rng) {
  M_ = mdp_.bellman_image(h_, v_next_);
}

double GenerativeOracle::operator()(const Vec& phi) {
  ++queries_;
  const double n2 = phi.squaredNorm();
  const double mean = phi.dot(M_ * phi);
  if (n2 == 0.0) return mean;
  const Vec q = mdp_.transition(h_, phi / std::sqrt(n2));
  const double ev = q.dot(v_next_);
  // Draw s' from q plus the terminal state (value 0).
  double u = rng_.uniform();
  double vs = 0.0;
  for (int s = 0; s < mdp_.n_states; ++s) {
    if (u < q[s]) {
      vs = v_next_[s];
      break;
    }
    u -= q[s];
  }
  return mean + n2 * (vs - ev);
}

RecoverResult recover_quadratic_matrix(const QuadraticOracle& oracle, int d, int k, double eps,
                                       double delta, const RecoverParams& prm, Stream rng) {
  if (k < 1 || k > d) throw ConfigError("recovery needs 1 <= k <= d");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  const int kp = std::min(2 * k, d);
  const double dd = static_cast<double>(d);
  const double lg = std::log(dd / delta);
  RecoverResult res;
  res.n = prm.n_override > 0 ? prm.n_override
                             : ceil_count(prm.C_n * dd * dd * k * k * prm.kappa * prm.kappa * lg *
                                          lg / (eps * eps));
  res.L = prm.L_override > 0
              ? prm.L_override
              : static_cast<int>(std::floor(prm.C_L * std::max(std::log(dd / eps), 0.0))) + 1;
  const double m = prm.m_override > 0
                       ? prm.m_override
                       : default_probe_scale(prm.C_m, d, static_cast<double>(res.n), delta);
  Mat Yx;
  if (prm.mode == EstimatorMode::Exact) {
    // Polarization: f((e_i + x)/2) - f((e_i - x)/2) = e_i^T M x.
    Stream init = rng.child(0);
    Mat X(d, kp);
    for (int j = 0; j < kp; ++j) X.col(j) = init.unit_sphere(d);
    Mat Xprev = X, Y(d, kp);
    for (int l = 0; l < res.L; ++l) {
      for (int c = 0; c < kp; ++c) {
        for (int i = 0; i < d; ++i) {
          Vec plus = 0.5 * X.col(c), minus = -0.5 * X.col(c);
          plus[i] += 0.5;
          minus[i] += 0.5;
          Y(i, c) = 2.0 * (oracle(plus) - oracle(minus));
        }
      }
      res.samples += 2LL * d * kp;
      Xprev = X;
      X = householder_qr(Y).Q;
    }
    Yx = Y * Xprev.transpose();
  } else {
    const QuadraticSubspaceResult r =
        quadratic_subspace_iteration(oracle, d, kp, res.n, m, res.L, rng.child(1));
    res.samples += r.samples;
    Yx = r.Y * r.X_prev.transpose();
  }
  res.X = top_k_by_magnitude(0.5 * (Yx + Yx.transpose()), k);

  // Stage 2: designs e_i and (e_i + e_j)/sqrt 2, plus k held-out random units.
  const long long n2 = prm.mode == EstimatorMode::Exact
                           ? 1
                           : (prm.n2_override > 0 ? prm.n2_override : res.n);
  auto observe = [&](const Vec& w) {
    const Vec a = res.X * w;
    double acc = 0.0;
    for (long long i = 0; i < n2; ++i) acc += oracle(a);
    res.samples += n2;
    return acc / static_cast<double>(n2);
  };
  res.C = Mat::Zero(k, k);
  for (int i = 0; i < k; ++i) res.C(i, i) = observe(Vec::Unit(k, i));
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      Vec w = Vec::Zero(k);
      w[i] = w[j] = 1.0 / std::sqrt(2.0);
      const double y = observe(w);
      res.C(i, j) = res.C(j, i) = y - 0.5 * (res.C(i, i) + res.C(j, j));
    }
  }
  Stream held = rng.child(2);
  for (int t = 0; t < k; ++t) {
    const Vec w = held.unit_sphere(k);
    res.residual = std::max(res.residual, std::abs(observe(w) - w.dot(res.C * w)));
  }
  if (res.residual > prm.residual_tol)
    throw AlgorithmError("recovery residual " + std::to_string(res.residual) +
                         " above threshold; stage-1 frame misaligned");
  res.M = res.X * res.C * res.X.transpose();
  return res;
}

PolicyResult learn_policy(const QuadraticMDP& mdp, double eps, double delta,
                          const RecoverParams& prm, std::uint64_t seed) {
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  PolicyResult out;
  out.M_hat.resize(mdp.H);
  out.M_target.resize(mdp.H);
  out.policy.resize(mdp.H);
  const std::vector<Mat> Qstar = optimal_q_matrices(mdp);
  const double level_eps = eps / mdp.H;
  const double level_delta = delta / mdp.H;
  Vec v_next = Vec::Zero(mdp.n_states);
  for (int h = mdp.H - 1; h >= 0; --h) {
    GenerativeOracle gen(mdp, h, v_next, Stream::derive(seed, StreamTag::Rl, 1, h));
    QuadraticOracle oracle = [&gen](const Vec& phi) { return gen(phi); };
    RecoverResult r;
    try {
      r = recover_quadratic_matrix(oracle, mdp.d, mdp.k, level_eps, level_delta, prm,
                                   Stream::derive(seed, StreamTag::Rl, 2, h));
    } catch (const AlgorithmError& e) {
      throw AlgorithmError("level " + std::to_string(h) + ": " + e.what());
    }
    out.M_hat[h] = r.M;
    out.M_target[h] = gen.target();
    out.policy[h] = mdp.greedy_policy(r.M);
    v_next = mdp.greedy_values(r.M);
    LevelRecord rec;
    rec.h = h;
    rec.samples = r.samples;
    rec.error = spectral_norm(r.M - gen.target());
    rec.value_gap = (v_next - mdp.greedy_values(Qstar[h])).cwiseAbs().maxCoeff();
    out.levels.push_back(rec);
    out.samples += r.samples;
    out.max_level_error = std::max(out.max_level_error, rec.error);
  }
  const Vec vstar = optimal_value(mdp);
  const Vec vpi = policy_value(mdp, out.policy);
  out.value_gap = (vstar - vpi).maxCoeff();
  return out;
}

}  // namespace polybandit
