#include "properties.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "polybandit/env.hpp"
#include "polybandit/harness.hpp"
#include "polybandit/linalg.hpp"
#include "polybandit/spectral.hpp"
#include "polybandit/tensor.hpp"
#include "polybandit/zorder.hpp"

namespace polybandit::props {

namespace {

using Clock = std::chrono::steady_clock;

class Tally {
 public:
  Tally(std::string name, int trials) : t0_(Clock::now()) {
    res_.name = std::move(name);
    res_.trials = trials;
  }
  // Records a failed check; the first message is kept.
  void check(bool ok, const std::string& what) {
    if (ok) return;
    if (res_.failures == 0) res_.detail = what;
    ++res_.failures;
  }
  void note(const std::string& s) {
    if (res_.failures == 0) res_.detail = s;
  }
  SuiteResult finish() {
    res_.seconds = std::chrono::duration<double>(Clock::now() - t0_).count();
    return res_;
  }

 private:
  SuiteResult res_;
  Clock::time_point t0_;
};

int uniform_int(Stream& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

std::string fmt(const char* label, double x) {
  std::ostringstream os;
  os << label << x;
  return os.str();
}

// Unit vector with the given coordinates along V's columns plus a random
// orthogonal remainder of norm `rest`.
Vec compose(const Mat& V, const Vec& coef, double rest, Stream& rng) {
  Vec a = V * coef;
  Vec w = rng.normal_vec(static_cast<int>(V.rows()));
  w -= V * (V.transpose() * w);
  if (w.norm() > 1e-12 && rest > 0) a += rest * w.normalized();
  return a.normalized();
}

struct ZStats {
  std::vector<double> z;
  void add(double v) { z.push_back(v); }
  // Pooled mean within 3 standard errors and at most 2% of |z| > 3.
  bool pooled_ok(std::string* msg) const {
    const double n = static_cast<double>(z.size());
    double mean = 0, sq = 0;
    int tail = 0;
    for (double v : z) {
      mean += v;
      if (std::abs(v) > 3.0) ++tail;
    }
    mean /= n;
    for (double v : z) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / (n - 1));
    const double frac = tail / n;
    std::ostringstream os;
    os << "mean z " << mean << " (se " << sd / std::sqrt(n) << "), sd " << sd << ", |z|>3 "
       << frac;
    *msg = os.str();
    return std::abs(mean) <= 3.0 * sd / std::sqrt(n) && frac <= 0.02;
  }
};

// z-score of u^T(estimate - expected) from R independent replicates.
template <class F>
double replicate_z(const F& draw, const Vec& expected, const Vec& u, int R) {
  std::vector<double> x(R);
  double mean = 0;
  for (int r = 0; r < R; ++r) {
    x[r] = u.dot(draw(r) - expected);
    mean += x[r];
  }
  mean /= R;
  double sq = 0;
  for (double v : x) sq += (v - mean) * (v - mean);
  const double se = std::sqrt(sq / (R - 1) / R);
  return se > 0 ? mean / se : 0.0;
}

}  // namespace

SuiteResult frame_orthonormality(int trials, std::uint64_t seed) {
  Tally tally("frame_orthonormality", trials);
  Stream rng = Stream::derive(seed, StreamTag::Harness, 1);
  const ModelKind kinds[] = {ModelKind::EV, ModelKind::LR, ModelKind::SYM, ModelKind::ASYM,
                             ModelKind::POLY_LOWRANK};
  double worst = 0;
  for (int i = 0; i < trials; ++i) {
    const ModelKind kind = kinds[i % 5];
    const int d = uniform_int(rng, 2, 24);
    const int k = uniform_int(rng, 1, kind == ModelKind::LR ? std::min(d / 2, 6) : std::min(d, 6));
    const int p = uniform_int(rng, 2, 5);
    const RewardModel m = make_random_model(kind, d, k, p, {}, rng());
    for (const Mat& V : m.frames) {
      const double e = (V.transpose() * V - Mat::Identity(k, k)).cwiseAbs().maxCoeff();
      worst = std::max(worst, e);
      tally.check(e <= 1e-9, to_string(kind) + fmt(" frame error ", e));
    }
    tally.check(static_cast<int>(m.frames.size()) == (kind == ModelKind::ASYM ? m.p : 1),
                "wrong frame count");
  }
  tally.note(fmt("max |V^T V - I| = ", worst));
  return tally.finish();
}

SuiteResult probe_validity(int trials, std::uint64_t seed) {
  Tally tally("probe_validity", trials);
  Stream rng = Stream::derive(seed, StreamTag::Harness, 2);
  long long probes = 0;
  for (int i = 0; i < trials; ++i) {
    const int d = uniform_int(rng, 2, 32);
    const long long n = uniform_int(rng, 1, 400);
    const double m = default_probe_scale(1.0, d, static_cast<double>(n), 0.1);
    Stream s = rng.child(static_cast<std::uint64_t>(i));
    const ProbeBatch b = sample_probes(s, n, m, d);
    tally.check(b.Z.cols() == n && b.Z.rows() == d, "batch shape");
    for (long long j = 0; j < n; ++j)
      tally.check(b.Z.col(j).norm() <= 1.0, fmt("probe norm ", b.Z.col(j).norm()));
    ProbeSource src(rng.child(1'000'000 + static_cast<std::uint64_t>(i)), m, d);
    for (long long j = 0; j < n; ++j)
      tally.check(src.next().norm() <= 1.0, "streamed probe outside the unit ball");
    probes += 2 * n;
  }
  tally.note(fmt("probes checked: ", static_cast<double>(probes)));
  return tally.finish();
}

SuiteResult unbiased_matrix_estimator(int trials, std::uint64_t seed) {
  Tally tally("unbiased_matrix_estimator", trials);
  Stream rng = Stream::derive(seed, StreamTag::Harness, 3);
  ZStats zs;
  constexpr int R = 20;
  for (int i = 0; i < trials; ++i) {
    const int d = uniform_int(rng, 2, 8);
    const int k = uniform_int(rng, 1, d);
    auto model = std::make_shared<const RewardModel>(
        make_random_model(ModelKind::EV, d, k, 2, {}, rng()));
    BanditSession s(model, 0.1, rng());
    const Vec a = rng.unit_sphere(d);
    const Vec u = rng.unit_sphere(d);
    const long long n = 200;
    const double m = 10.0 * d;
    const Vec expected = expected_matrix_action(*model, a);
    const std::uint64_t key = rng();
    const double z = replicate_z(
        [&](int r) { return estimate_matrix_action(s, a, n, m, Stream(key).child(r)); }, expected,
        u, R);
    tally.check(std::isfinite(z), "non-finite z");
    zs.add(z);
  }
  std::string msg;
  tally.check(zs.pooled_ok(&msg), msg);
  tally.note(msg);
  return tally.finish();
}

SuiteResult unbiased_tensor_estimator(int trials, std::uint64_t seed) {
  Tally tally("unbiased_tensor_estimator", trials);
  Stream rng = Stream::derive(seed, StreamTag::Harness, 4);
  ZStats zs;
  constexpr int R = 20;
  for (int i = 0; i < trials; ++i) {
    const int p = 3 + i % 3;  // odd against closed_form_G, even with the bias term
    const int d = uniform_int(rng, 2, 6);
    const int k = uniform_int(rng, 1, std::min(d, 3));
    auto model = std::make_shared<const RewardModel>(
        make_random_model(ModelKind::SYM, d, k, p, {}, rng()));
    BanditSession s(model, 0.1, rng());
    const Vec a = rng.unit_sphere(d);
    const Vec u = rng.unit_sphere(d);
    const long long n = 200;
    const double m = 10.0 * d;
    const Vec expected =
        p % 2 == 1 ? closed_form_G(*model, a, p, m) : expected_tensor_G(*model, a, p, m);
    const std::uint64_t key = rng();
    const double z = replicate_z(
        [&](int r) { return estimate_tensor_G(s, a, p, n, m, Stream(key).child(r)); }, expected,
        u, R);
    tally.check(std::isfinite(z), "non-finite z");
    zs.add(z);
  }
  std::string msg;
  tally.check(zs.pooled_ok(&msg), msg);
  tally.note(msg);
  return tally.finish();
}

SuiteResult closed_form_contraction(int trials, std::uint64_t seed) {
  Tally tally("closed_form_contraction", trials);
  Stream rng = Stream::derive(seed, StreamTag::Harness, 5);
  double worst = 0;
  for (int i = 0; i < trials; ++i) {
    const int p = 3 + i % 3;
    const int k = 1 + (i / 3) % 3;
    const int d = uniform_int(rng, k + 1, 12);
    const RewardModel model = make_random_model(ModelKind::SYM, d, k, p, {}, rng());
    const Mat& V = model.frames[0];
    Vec c(k);
    c[0] = 1.0 / std::sqrt(static_cast<double>(d)) +
           (1.0 - 1.0 / std::sqrt(static_cast<double>(d))) * rng.uniform();
    if (rng.uniform() < 0.5) c[0] = -c[0];
    for (int j = 1; j < k; ++j) c[j] = (2 * rng.uniform() - 1) * 0.5 * std::abs(c[0]);
    const double used = c.squaredNorm();
    const double rest = used < 1 ? std::sqrt(1 - used) : 0.0;
    // Rescale so the unit vector keeps |c_1| >= 1/sqrt(d).
    Vec a = compose(V, c / std::sqrt(std::max(used, 1.0)), rest, rng);
    if (!good_initial_candidate(model, a)) {
      tally.check(false, "constructed start is not admissible");
      continue;
    }
    const double m = 4.0 * d;
    const Vec g = closed_form_G(model, a, p, m);
    const double before = tan_theta(a, V.col(0));
    const double after = tan_theta(g, V.col(0));
    const double ratio = before > 0 ? after / before : 0.0;
    worst = std::max(worst, ratio);
    tally.check(after <= 0.5 * before + 1e-12,
                fmt("contraction ratio ", ratio) + fmt(" at p=", p) + fmt(" k=", k));
  }
  tally.note(fmt("max tan ratio ", worst));
  return tally.finish();
}

SuiteResult qr_orthonormality(int trials, std::uint64_t seed) {
  Tally tally("qr_orthonormality", trials);
  Stream rng = Stream::derive(seed, StreamTag::Harness, 6);
  double worst = 0;
  for (int i = 0; i < trials; ++i) {
    const int d = uniform_int(rng, 1, 30);
    const int k = uniform_int(rng, 1, d);
    Mat Y(d, k);
    for (int c = 0; c < k; ++c) Y.col(c) = rng.normal_vec(d);
    const QR qr = householder_qr(Y);
    const double orth = orthonormality_error(qr.Q);
    const double recon = (qr.Q * qr.R - Y).cwiseAbs().maxCoeff() / std::max(1.0, Y.norm());
    worst = std::max(worst, orth);
    tally.check(orth <= 1e-9, fmt("orthonormality ", orth));
    tally.check(recon <= 1e-9, fmt("QR - Y ", recon));
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < r; ++c) tally.check(qr.R(r, c) == 0.0, "R not upper triangular");
    for (int c = 0; c < k; ++c) {
      Vec q = qr.Q.col(c);
      Vec f = q;
      fix_sign(f);
      tally.check(f == q, "sign convention");
    }
  }
  tally.note(fmt("max orthonormality error ", worst));
  return tally.finish();
}

SuiteResult asym_and_shift_spectra(int trials, std::uint64_t seed) {
  Tally tally("asym_and_shift_spectra", trials);
  Stream rng = Stream::derive(seed, StreamTag::Harness, 7);
  for (int i = 0; i < trials; ++i) {
    if (i % 2 == 0) {
      const int d1 = uniform_int(rng, 1, 8);
      const int d2 = uniform_int(rng, 1, 8);
      Mat Mt(d1, d2);
      for (int r = 0; r < d1; ++r)
        for (int c = 0; c < d2; ++c) Mt(r, c) = rng.normal();
      Mt /= spectral_norm(Mt) * (1.0 + rng.uniform());
      const RewardModel s = asym_to_sym(Mt);
      Eigen::JacobiSVD<Mat> svd(Mt, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Vec sv = svd.singularValues();
      // Eigenvalues of [[0, M^T], [M, 0]] are +-sigma_i and zeros.
      const SymEig e = sym_eig(s.matrix());
      std::vector<double> want;
      for (Eigen::Index j = 0; j < sv.size(); ++j) {
        want.push_back(sv[j]);
        want.push_back(-sv[j]);
      }
      while (static_cast<int>(want.size()) < d1 + d2) want.push_back(0.0);
      std::sort(want.begin(), want.end(), std::greater<double>());
      double err = 0;
      for (int j = 0; j < d1 + d2; ++j) err = std::max(err, std::abs(e.values[j] - want[j]));
      tally.check(err <= 1e-9, fmt("asym spectrum error ", err));
      Mat block = Mat::Zero(d1 + d2, d1 + d2);
      block.topRightCorner(d2, d1) = Mt.transpose();
      block.bottomLeftCorner(d1, d2) = Mt;
      tally.check((block - s.matrix()).cwiseAbs().maxCoeff() <= 1e-9, "asym block mismatch");
      Vec top(d1 + d2);
      top << svd.matrixV().col(0), svd.matrixU().col(0);
      top /= std::sqrt(2.0);
      tally.check(std::abs(std::abs(top.dot(s.frames[0].col(0))) - 1.0) <= 1e-9,
                  "asym top eigenvector");
    } else {
      const int d = uniform_int(rng, 2, 10);
      const int k = uniform_int(rng, 1, d);
      RewardModel ev = make_random_model(ModelKind::EV, d, k, 2, {}, rng());
      // Mixed signs so the shift is non-trivial.
      for (int j = 1; j < k; ++j)
        if (rng.uniform() < 0.5) ev.lambdas[j] = -ev.lambdas[j];
      std::sort(ev.lambdas.begin() + 1, ev.lambdas.end(),
                [](double x, double y) { return std::abs(x) > std::abs(y); });
      const double c = std::abs(*std::min_element(ev.lambdas.begin(), ev.lambdas.end()));
      const RewardModel sh = shift_psd(ev);
      const Mat want = ev.matrix() + c * Mat::Identity(d, d);
      tally.check((sh.matrix() - want).cwiseAbs().maxCoeff() <= 1e-9, "shift matrix mismatch");
      const SymEig e0 = sym_eig(ev.matrix());
      const SymEig e1 = sym_eig(sh.matrix());
      double err = 0;
      for (int j = 0; j < d; ++j) err = std::max(err, std::abs(e1.values[j] - e0.values[j] - c));
      tally.check(err <= 1e-9, fmt("shift spectrum error ", err));
      for (double l : sh.lambdas) tally.check(l >= -1e-12, "shifted model not PSD");
      if (e0.values[0] - e0.values[1] > 1e-6)
        tally.check(std::abs(std::abs(e1.vectors.col(0).dot(e0.vectors.col(0))) - 1) <= 1e-9,
                    "shift moved the top eigenvector");
    }
  }
  return tally.finish();
}

SuiteResult angle_to_regret_bound(int trials, std::uint64_t seed) {
  Tally tally("angle_to_regret_bound", trials);
  Stream rng = Stream::derive(seed, StreamTag::Harness, 8);
  double tightest = 0;
  for (int i = 0; i < trials; ++i) {
    const int p = 2 * uniform_int(rng, 1, 3);
    const int d = uniform_int(rng, 2, 10);
    const double lam = 0.1 + 0.9 * rng.uniform();
    const RewardModel model = make_random_model(ModelKind::SYM, d, 1, p, {lam}, rng());
    const double r_star = optimal_reward(model).r_star;
    const Vec& v = model.frames[0].col(0);
    for (int j = 0; j < 10; ++j) {
      // Mix of near-optimal and random directions.
      Vec a = rng.unit_sphere(d);
      if (j % 2 == 0) a = (v + (0.05 + rng.uniform()) * a).normalized();
      const double gap = r_star - eval_vec(model, a);
      const double oracle = lam * (1.0 - std::pow(std::abs(v.dot(a)), p));
      tally.check(std::abs(gap - oracle) <= 1e-12, fmt("reward identity off by ", gap - oracle));
      const double bound = angle_to_regret(tan_theta(a, v), p, r_star);
      if (bound > 0) tightest = std::max(tightest, gap / bound);
      tally.check(gap <= bound + 1e-12, fmt("gap exceeds bound by ", gap - bound));
    }
  }
  tally.note(fmt("max gap/bound ", tightest));
  return tally.finish();
}

SuiteResult ledger_monotonicity(int trials, std::uint64_t seed) {
  Tally tally("ledger_monotonicity", trials);
  Stream rng = Stream::derive(seed, StreamTag::Harness, 9);
  for (int i = 0; i < trials; ++i) {
    const ModelKind kind = i % 3 == 0 ? ModelKind::EV : i % 3 == 1 ? ModelKind::SYM : ModelKind::LR;
    const int d = uniform_int(rng, 2, 8);
    const int k = uniform_int(rng, 1, kind == ModelKind::LR ? d / 2 : d);
    auto model = std::make_shared<const RewardModel>(make_random_model(kind, d, k, 3, {}, rng()));
    BanditSession s(model, 0.5, rng());
    RegretTrace trace;
    s.attach_trace(&trace, uniform_int(rng, 1, 5));
    const double r_star = s.r_star();
    double prev_cum = 0;
    long long prev_t = 0;
    for (int step = 0; step < 30; ++step) {
      const double scale = rng.uniform();
      if (kind == ModelKind::LR) {
        Mat A(d, d);
        for (int c = 0; c < d; ++c) A.col(c) = rng.normal_vec(d);
        A *= scale / A.norm();
        if (step % 7 == 0) s.pull_repeated(A, uniform_int(rng, 1, 4));
        else s.pull_mat(A);
      } else {
        const Vec a = scale * rng.unit_sphere(d);
        if (step % 7 == 0) s.pull_repeated(a, uniform_int(rng, 1, 4));
        else s.pull_vec(a);
      }
      const double inc = s.ledger().cumulative_regret - prev_cum;
      const long long dt = s.t() - prev_t;
      tally.check(inc >= -1e-12 && inc <= 2 * r_star * dt + 1e-12,
                  fmt("ledger increment ", inc) + fmt(" over steps ", dt));
      prev_cum = s.ledger().cumulative_regret;
      prev_t = s.t();
    }
    s.flush_trace();
    for (std::size_t r = 0; r < trace.rows.size(); ++r) {
      const TraceRow& row = trace.rows[r];
      tally.check(row.instantaneous_regret >= -1e-12 && row.instantaneous_regret <= 2 * r_star + 1e-12,
                  fmt("instantaneous regret ", row.instantaneous_regret));
      if (r > 0) {
        tally.check(row.t > trace.rows[r - 1].t, "trace t not strictly increasing");
        tally.check(row.cumulative_regret >= trace.rows[r - 1].cumulative_regret - 1e-12,
                    "trace cumulative regret decreased");
      }
    }
  }
  return tally.finish();
}

SuiteResult seed_determinism(int trials, std::uint64_t seed) {
  Tally tally("seed_determinism", trials);
  Stream rng = Stream::derive(seed, StreamTag::Harness, 10);
  for (int i = 0; i < trials; ++i) {
    ExperimentConfig cfg;
    cfg.trace_stride = 50;
    if (i % 2 == 0) {
      cfg.env.kind = ModelKind::EV;
      cfg.env.d = uniform_int(rng, 3, 6);
      cfg.env.k = 1;
      cfg.env.sigma = 0.1;
      cfg.algo.id = "npm";
      cfg.algo.eps = 0.3;
      cfg.algo.n = 40;
      cfg.algo.L = 3;
      cfg.T = 600;
    } else {
      cfg.env.kind = ModelKind::EV;
      cfg.env.d = uniform_int(rng, 2, 4);
      cfg.env.k = 1;
      cfg.env.sigma = 0.1;
      cfg.algo.id = "lin_ucb";
      cfg.T = 150;
    }
    const std::uint64_t run_seed = rng() % 1'000'000;
    // Two serial runs plus two concurrent runs of the same (config, seed).
    std::vector<std::string> csv(4);
    auto one = [&](std::size_t j) {
      std::ostringstream os;
      write_trace_csv(os, run_experiment(cfg, run_seed));
      csv[j] = os.str();
    };
    one(0);
    one(1);
    parallel_for(2, [&](std::size_t j) { one(2 + j); });
    tally.check(!csv[0].empty(), "empty trace");
    for (int j = 1; j < 4; ++j) tally.check(csv[j] == csv[0], "trace bytes differ between runs");
  }
  return tally.finish();
}

namespace {

// An exception counts as one failed trial.
Suite guarded(std::string name, SuiteResult (*fn)(int, std::uint64_t)) {
  return {name, [name, fn](int trials, std::uint64_t seed) {
            try {
              return fn(trials, seed);
            } catch (const std::exception& e) {
              SuiteResult r;
              r.name = name;
              r.trials = trials;
              r.failures = 1;
              r.detail = std::string("threw: ") + e.what();
              return r;
            }
          }};
}

}  // namespace

const std::vector<Suite>& all_suites() {
  static const std::vector<Suite> suites = {
      guarded("frame_orthonormality", frame_orthonormality),
      guarded("probe_validity", probe_validity),
      guarded("unbiased_matrix_estimator", unbiased_matrix_estimator),
      guarded("unbiased_tensor_estimator", unbiased_tensor_estimator),
      guarded("closed_form_contraction", closed_form_contraction),
      guarded("qr_orthonormality", qr_orthonormality),
      guarded("asym_and_shift_spectra", asym_and_shift_spectra),
      guarded("angle_to_regret_bound", angle_to_regret_bound),
      guarded("ledger_monotonicity", ledger_monotonicity),
      guarded("seed_determinism", seed_determinism),
  };
  return suites;
}

}  // namespace polybandit::props
