#include "polybandit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polybandit/linalg.hpp"
#include "polybandit/zorder.hpp"

namespace polybandit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_kind(const BanditSession& s, ModelKind kind, const char* what) {
  if (s.model().kind != kind)
    throw ConfigError(std::string(what) + " needs a " + to_string(kind) + " session");
}

long long ceil_count(double x) {
  if (!(x >= 1.0)) return 1;
  if (x > 9.0e18) throw ConfigError("batch size overflows");
  return static_cast<long long>(std::ceil(x));
}

Vec sphere_start(std::uint64_t seed, int d, std::uint64_t candidate = 0) {
  Stream init = Stream::derive(seed, StreamTag::Init, candidate);
  return init.unit_sphere(d);
}

Mat sphere_columns(std::uint64_t seed, int d, int k, std::uint64_t candidate = 0) {
  Stream init = Stream::derive(seed, StreamTag::Init, candidate);
  Mat X(d, k);
  for (int j = 0; j < k; ++j) X.col(j) = init.unit_sphere(d);
  return X;
}

NpmResult npm_loop(BanditSession& s, const NpmParams& prm, const NpmSchedule& sch, double gap,
                   std::uint64_t seed) {
  const RewardModel& model = s.model();
  const int d = model.d;
  const Mat M = model.matrix();
  const Vec& vstar = std::get<Vec>(s.optimal_action());
  NpmResult res;
  res.schedule = sch;
  Vec a = prm.start ? *prm.start : sphere_start(seed, d);
  if (a.size() != d) throw ConfigError("start vector has wrong dimension");
  a.normalize();
  if (prm.stop_at_eps && tan_theta(a, vstar) <= prm.eps) res.samples_to_eps = 0;
  for (int l = 1; l <= sch.L; ++l) {
    if (prm.stop_at_eps && res.samples_to_eps >= 0) break;
    const Vec expected = 0.5 * (M * a);
    Vec y;
    if (prm.mode == EstimatorMode::Exact) {
      y = expected;
    } else {
      y = estimate_matrix_action(s, a, sch.n, sch.m,
                                 Stream::derive(seed, StreamTag::Probe, 0,
                                                static_cast<std::uint64_t>(l)));
      res.samples += sch.n;
    }
    const Vec G = 2.0 * (y - expected);
    const double yn = y.norm();
    if (!(yn > 0.0)) throw AlgorithmError("power iteration produced a zero vector");
    a = y / yn;
    IterationDiag dg;
    dg.l = l;
    dg.samples = res.samples;
    dg.tan_theta = tan_theta(a, vstar);
    dg.noise_norm = G.norm();
    dg.noise_on_top = std::abs(vstar.dot(G));
    dg.gap_condition = gap > 0 ? 5.0 * dg.noise_norm / (prm.eps * gap) : kNaN;
    res.diag.push_back(dg);
    res.iterations = l;
    if (prm.stop_at_eps && dg.tan_theta <= prm.eps && res.samples_to_eps < 0)
      res.samples_to_eps = res.samples;
  }
  if (!prm.stop_at_eps) {
    for (const auto& dg : res.diag) {
      if (dg.tan_theta <= prm.eps) {
        res.samples_to_eps = dg.samples;
        break;
      }
    }
  }
  res.a = a;
  return res;
}

}  // namespace

NpmSchedule npm_schedule(int d, const NpmParams& prm, double alpha) {
  if (!(prm.eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(prm.delta > 0.0 && prm.delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("degenerate eigengap (alpha >= 1)");
  if (!(prm.lambda1 > 0.0)) throw ConfigError("lambda1 must be positive");
  NpmSchedule sch;
  sch.alpha = alpha;
  const double gap = prm.lambda1 * (1.0 - alpha);
  const double dd = static_cast<double>(d);
  sch.n = prm.n_override > 0
              ? prm.n_override
              : ceil_count(prm.C_n * dd * dd * std::log(dd / prm.delta) / (gap * gap) /
                           (prm.eps * prm.eps));
  sch.m = prm.m_override > 0 ? prm.m_override
                             : default_probe_scale(prm.C_m, d, static_cast<double>(sch.n), prm.delta);
  const double logterm = std::max(std::log(dd / prm.eps), 0.0);
  sch.L = prm.L_override > 0 ? prm.L_override
                             : static_cast<int>(std::floor(prm.C_L * logterm / (1.0 - alpha))) + 1;
  return sch;
}

NpmResult run_npm(BanditSession& s, const NpmParams& prm, std::uint64_t seed) {
  require_kind(s, ModelKind::EV, "run_npm");
  if (!(prm.eps > 0.0 && prm.eps < 0.5)) throw ConfigError("run_npm needs eps in (0, 1/2)");
  if (!(prm.lambda1 > 0.0)) throw ConfigError("lambda1 must be positive");
  const double alpha = std::abs(prm.lambda2 / prm.lambda1);
  const NpmSchedule sch = npm_schedule(s.model().d, prm, alpha);
  return npm_loop(s, prm, sch, prm.lambda1 - std::abs(prm.lambda2), seed);
}

NpmResult run_npm_gap_free(BanditSession& s, const NpmParams& prm, std::uint64_t seed) {
  require_kind(s, ModelKind::EV, "run_npm_gap_free");
  if (!(prm.eps > 0.0 && prm.eps < std::sqrt(2.0)))
    throw ConfigError("gap-free run needs eps in (0, sqrt 2)");
  for (double l : s.model().lambdas)
    if (l < 0.0) throw ConfigError("gap-free run needs a PSD model; shift it first");
  const double alpha = 1.0 - prm.eps * prm.eps / 2.0;
  const NpmSchedule sch = npm_schedule(s.model().d, prm, alpha);
  return npm_loop(s, prm, sch, prm.lambda1 * (1.0 - alpha), seed);
}

RewardModel shift_psd(const RewardModel& ev) {
  if (ev.kind != ModelKind::EV) throw ConfigError("shift_psd needs an EV model");
  // lambda_k in decreasing value order, i.e. the most negative eigenvalue.
  const double c = std::abs(*std::min_element(ev.lambdas.begin(), ev.lambdas.end()));
  const Mat S = ev.matrix() + c * Mat::Identity(ev.d, ev.d);
  const SymEig e = sym_eig(S);
  RewardModel out;
  out.kind = ModelKind::EV;
  out.d = ev.d;
  out.p = 2;
  out.seed = ev.seed;
  out.unbounded_scale = true;
  std::vector<int> keep;
  for (int i = 0; i < ev.d; ++i)
    if (std::abs(e.values[i]) > 1e-12) keep.push_back(i);
  out.k = static_cast<int>(keep.size());
  if (out.k == 0) throw AlgorithmError("shifted model is zero");
  Mat V(ev.d, out.k);
  for (int j = 0; j < out.k; ++j) {
    out.lambdas.push_back(e.values[keep[j]]);
    V.col(j) = e.vectors.col(keep[j]);
  }
  // Keep the original top eigenvector (and its sign) when it is unique.
  if (ev.k >= 1 && std::abs(V.col(0).dot(ev.frames[0].col(0))) > 1 - 1e-9)
    V.col(0) = ev.frames[0].col(0);
  out.frames = {V};
  out.validate();
  return out;
}

RewardModel asym_to_sym(const Mat& Mt) {
  const int d1 = static_cast<int>(Mt.rows());
  const int d2 = static_cast<int>(Mt.cols());
  Eigen::JacobiSVD<Mat> svd(Mt, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] > 1.0 + 1e-12) throw ConfigError("asym_to_sym needs ||M||_2 <= 1");
  RewardModel out;
  out.kind = ModelKind::EV;
  out.d = d1 + d2;
  out.p = 2;
  std::vector<Vec> cols;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] <= 1e-12) continue;
    Vec plus(out.d), minus(out.d);
    plus << svd.matrixV().col(i), svd.matrixU().col(i);
    minus << svd.matrixV().col(i), -svd.matrixU().col(i);
    plus /= std::sqrt(2.0);
    minus /= std::sqrt(2.0);
    out.lambdas.push_back(sv[i]);
    cols.push_back(plus);
    out.lambdas.push_back(-sv[i]);
    cols.push_back(minus);
  }
  out.k = static_cast<int>(cols.size());
  if (out.k == 0) throw ConfigError("asym_to_sym of a zero matrix");
  Mat V(out.d, out.k);
  for (int j = 0; j < out.k; ++j) V.col(j) = cols[j];
  out.frames = {V};
  out.validate();
  return out;
}

SubspaceSchedule subspace_schedule(int d, const SubspaceParams& prm) {
  if (prm.k < 1) throw ConfigError("k must be positive");
  if (!(prm.eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(prm.delta > 0.0 && prm.delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (!(prm.lambda_k > 0.0)) throw ConfigError("lambda_k must be positive");
  SubspaceSchedule sch;
  sch.k_prime = 2 * prm.k;
  if (sch.k_prime > d) throw ConfigError("k' = 2k exceeds d");
  const double dd = static_cast<double>(d);
  const double lg = std::log(dd / prm.delta);
  sch.n = prm.n_override > 0 ? prm.n_override
                             : ceil_count(prm.C_n * dd * dd * lg * lg /
                                          (prm.lambda_k * prm.lambda_k) / (prm.eps * prm.eps));
  sch.m = prm.m_override > 0 ? prm.m_override
                             : default_probe_scale(prm.C_m, d, static_cast<double>(sch.n), prm.delta);
  sch.L = prm.L_override > 0
              ? prm.L_override
              : static_cast<int>(std::floor(prm.C_L * std::max(std::log(dd / prm.eps), 0.0))) + 1;
  return sch;
}

SubspaceResult run_subspace_iteration(BanditSession& s, const SubspaceParams& prm,
                                      std::uint64_t seed) {
  require_kind(s, ModelKind::LR, "run_subspace_iteration");
  const RewardModel& model = s.model();
  const int d = model.d;
  const SubspaceSchedule sch = subspace_schedule(d, prm);
  const Mat M = model.matrix();
  const Mat& V = model.frames[0];
  SubspaceResult res;
  res.schedule = sch;
  res.chosen_k_prime = sch.k_prime;
  Mat X = sphere_columns(seed, d, sch.k_prime);
  Mat A = Mat::Zero(d, d);
  for (int l = 1; l <= sch.L; ++l) {
    const Mat expected = M * X;
    Mat Y(d, sch.k_prime);
    if (prm.mode == EstimatorMode::Exact) {
      Y = expected;
    } else {
      const Stream probe_key =
          Stream::derive(seed, StreamTag::Probe, 0, static_cast<std::uint64_t>(l));
      for (int c = 0; c < sch.k_prime; ++c) {
        // The same z_1..z_n serve every column: replay the stream.
        ProbeSource src(probe_key, sch.m, d);
        Vec acc = Vec::Zero(d);
        const Vec x = X.col(c);
        for (long long i = 0; i < sch.n; ++i) {
          const Vec& z = src.next();
          acc.noalias() += s.pull_rank1(x, z) * z;
        }
        src.check_batch(sch.n);
        Y.col(c) = acc * (sch.m / static_cast<double>(sch.n));
      }
      res.samples += sch.n * sch.k_prime;
    }
    const QR qr = householder_qr(Y);
    A = Y * qr.Q.transpose();
    X = qr.Q;
    const Mat G = Y - expected;
    IterationDiag dg;
    dg.l = l;
    dg.samples = res.samples;
    dg.tan_theta = subspace_distance(X, V);
    dg.noise_norm = spectral_norm(G);
    dg.noise_on_top = spectral_norm(V.transpose() * G);
    dg.gap_condition = 5.0 * dg.noise_norm / (prm.eps * std::abs(model.lambdas.back()));
    res.diag.push_back(dg);
    res.max_orthonormality_error = std::max(res.max_orthonormality_error, orthonormality_error(X));
  }
  const double an = A.norm();
  if (!(an > 0.0)) throw AlgorithmError("subspace iteration produced a zero matrix");
  res.A = A / an;
  res.X = X;
  return res;
}

QuadraticSubspaceResult quadratic_subspace_iteration(const QuadraticOracle& oracle, int d,
                                                     int k_prime, long long n, double m, int L,
                                                     Stream rng) {
  if (k_prime < 1 || k_prime > d) throw ConfigError("k' must lie in [1, d]");
  if (n < 1 || L < 1) throw ConfigError("n and L must be positive");
  QuadraticSubspaceResult res;
  Mat X(d, k_prime);
  Stream init = rng.child(0);
  for (int j = 0; j < k_prime; ++j) X.col(j) = init.unit_sphere(d);
  Mat Xprev = X;
  Mat Y(d, k_prime);
  for (int l = 1; l <= L; ++l) {
    for (int c = 0; c < k_prime; ++c) {
      ProbeSource src(rng.child(static_cast<std::uint64_t>(l) * 1024 + c + 1), m, d);
      Vec acc = Vec::Zero(d);
      const Vec x = X.col(c);
      Vec act(d);
      for (long long i = 0; i < n; ++i) {
        const Vec& z = src.next();
        act = 0.5 * (x + z);
        acc.noalias() += oracle(act) * z;
      }
      src.check_batch(n);
      Y.col(c) = acc * (4.0 * m / static_cast<double>(n));
    }
    res.samples += n * k_prime;
    const QR qr = householder_qr(Y);
    Xprev = X;
    X = qr.Q;
    res.max_orthonormality_error = std::max(res.max_orthonormality_error, orthonormality_error(X));
  }
  res.X = X;
  res.Y = Y;
  res.X_prev = Xprev;
  return res;
}

int largest_gap_index(const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw ConfigError("empty spectrum");
  const int k = static_cast<int>(lambdas.size());
  int best = 1;
  double best_gap = -1.0;
  for (int l = 1; l <= k; ++l) {
    const double next = l < k ? std::abs(lambdas[l]) : 0.0;
    const double g = std::abs(lambdas[l - 1]) - next;
    if (g > best_gap) {
      best_gap = g;
      best = l;
    }
  }
  if (best_gap < std::abs(lambdas[0]) / k - 1e-12)
    throw AlgorithmError("eigengap pigeonhole violated; spectrum not sorted by magnitude");
  return best;
}

namespace {

struct EvTrial {
  Vec a;
  long long samples = 0;
  double max_orth = 0.0;
};

EvTrial gap_free_ev_trial(BanditSession& s, int k_prime, long long n, double m, int L,
                          EstimatorMode mode, std::uint64_t seed, std::uint64_t trial) {
  const RewardModel& model = s.model();
  const int d = model.d;
  EvTrial out;
  Mat Yx;
  if (mode == EstimatorMode::Exact) {
    const Mat M = model.matrix();
    Stream init = Stream::derive(seed, StreamTag::Spectral, trial).child(0);
    Mat X(d, k_prime);
    for (int j = 0; j < k_prime; ++j) X.col(j) = init.unit_sphere(d);
    Mat Xprev = X;
    Mat Y;
    for (int l = 1; l <= L; ++l) {
      Y = 2.0 * M * X;
      const QR qr = householder_qr(Y);
      Xprev = X;
      X = qr.Q;
      out.max_orth = std::max(out.max_orth, orthonormality_error(X));
    }
    Yx = Y * Xprev.transpose();
  } else {
    QuadraticOracle oracle = [&s](const Vec& a) { return s.pull_vec(a); };
    const QuadraticSubspaceResult r = quadratic_subspace_iteration(
        oracle, d, k_prime, n, m, L, Stream::derive(seed, StreamTag::Spectral, trial));
    Yx = r.Y * r.X_prev.transpose();
    out.samples = r.samples;
    out.max_orth = r.max_orthonormality_error;
  }
  // The quadratic form only sees the symmetric part.
  out.a = top_eigvec(0.5 * (Yx + Yx.transpose()));
  return out;
}

}  // namespace

SubspaceResult run_gap_free_subspace(BanditSession& s, const GapFreeParams& prm,
                                     std::uint64_t seed) {
  const SubspaceParams& b = prm.base;
  const int d = s.model().d;
  const double dd = static_cast<double>(d);
  if (prm.mode == GapFreeMode::LR) {
    require_kind(s, ModelKind::LR, "run_gap_free_subspace (LR mode)");
    SubspaceParams q = b;
    // Gap-free batch: lambda_k replaced by 1/k.
    q.lambda_k = 1.0 / b.k;
    return run_subspace_iteration(s, q, seed);
  }
  require_kind(s, ModelKind::EV, "run_gap_free_subspace (EV mode)");
  if (!(b.eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(b.delta > 0.0 && b.delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  const double lg = std::log(dd / b.delta);
  SubspaceResult res;
  if (prm.scheme == GapFreeScheme::ConditionNumber) {
    if (!(b.lambda_k > 0.0)) throw ConfigError("lambda_k must be positive");
    SubspaceSchedule sch;
    sch.k_prime = 2 * b.k;
    if (sch.k_prime > d) throw ConfigError("k' = 2k exceeds d");
    const double kappa = prm.lambda1 / b.lambda_k;
    sch.n = b.n_override > 0 ? b.n_override
                             : ceil_count(b.C_n * dd * dd * lg * lg * kappa * kappa / (b.eps * b.eps));
    sch.m = b.m_override > 0 ? b.m_override
                             : default_probe_scale(b.C_m, d, static_cast<double>(sch.n), b.delta);
    sch.L = b.L_override > 0
                ? b.L_override
                : static_cast<int>(std::floor(b.C_L * std::max(std::log(dd / b.eps), 0.0))) + 1;
    const EvTrial t = gap_free_ev_trial(s, sch.k_prime, sch.n, sch.m, sch.L, b.mode, seed, 0);
    res.a = t.a;
    res.samples = t.samples;
    res.schedule = sch;
    res.chosen_k_prime = sch.k_prime;
    res.max_orthonormality_error = t.max_orth;
    return res;
  }
  // k-restart: k' = 2, 4, ..., 2k, keep the best by estimated reward.
  const double kk = static_cast<double>(b.k);
  SubspaceSchedule sch;
  sch.n = b.n_override > 0 ? b.n_override
                           : ceil_count(b.C_n * dd * dd * kk * kk * lg * lg / (b.eps * b.eps));
  sch.m = b.m_override > 0 ? b.m_override
                           : default_probe_scale(b.C_m, d, static_cast<double>(sch.n), b.delta);
  sch.L = b.L_override > 0
              ? b.L_override
              : static_cast<int>(std::floor(b.C_L * kk * std::max(std::log(2.0 * dd / b.eps), 0.0))) + 1;
  const long long eval = prm.eval_pulls > 0 ? prm.eval_pulls : sch.n;
  double best = -std::numeric_limits<double>::infinity();
  for (int l = 1; l <= b.k; ++l) {
    const int kp = std::min(2 * l, d);
    sch.k_prime = kp;
    const EvTrial t = gap_free_ev_trial(s, kp, sch.n, sch.m, sch.L, b.mode, seed,
                                        static_cast<std::uint64_t>(l));
    res.samples += t.samples;
    res.max_orthonormality_error = std::max(res.max_orthonormality_error, t.max_orth);
    double score;
    if (b.mode == EstimatorMode::Exact) {
      score = eval_vec(s.model(), t.a);
    } else {
      score = s.pull_repeated(Action(t.a), eval) / static_cast<double>(eval);
      res.samples += eval;
    }
    res.restart_rewards.push_back(score);
    if (score > best) {
      best = score;
      res.a = t.a;
      res.chosen_k_prime = kp;
    }
    if (kp == d) break;
  }
  res.schedule = sch;
  return res;
}

void etc_commit(BanditSession& s, const Action& a, long long T, RegretTrace* trace) {
  if (s.t() > T) {
    if (trace) {
      trace->flagged = true;
      trace->flag_reason = "exploration used " + std::to_string(s.t()) + " pulls, horizon " +
                           std::to_string(T);
    }
    return;
  }
  s.set_phase("commit");
  s.pull_repeated(a, T - s.t());
  s.flush_trace();
}

}  // namespace polybandit
