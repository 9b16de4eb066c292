#include "polybandit/zorder.hpp"

#include <cmath>

#include "polybandit/linalg.hpp"

namespace polybandit {

namespace {

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

double double_factorial(int n) {
  double r = 1.0;
  for (int i = n; i > 1; i -= 2) r *= i;
  return r;
}

void require_sym(const RewardModel& model) {
  if (model.kind != ModelKind::SYM && model.kind != ModelKind::POLY_LOWRANK)
    throw ConfigError("tensor estimator needs a SYM model");
}

}  // namespace

ProbeBatch sample_probes(Stream& rng, long long n, double m, int d) {
  if (n < 1 || m < 1.0) throw ConfigError("sample_probes needs n >= 1 and m >= 1");
  ProbeBatch b;
  b.n = n;
  b.m = m;
  b.Z.resize(d, n);
  const double scale = 1.0 / std::sqrt(m);
  for (int attempt = 0; attempt <= kMaxBatchRetries; ++attempt) {
    bool ok = true;
    for (long long i = 0; i < n; ++i) {
      for (int r = 0; r < d; ++r) b.Z(r, i) = scale * rng.normal();
      if (b.Z.col(i).squaredNorm() > 1.0) ok = false;
    }
    if (ok) {
      b.resamples = attempt;
      return b;
    }
  }
  throw AlgorithmError("probe batch rejected " + std::to_string(kMaxBatchRetries) +
                       " times; raise m");
}

double default_probe_scale(double C_m, int d, double n, double delta) {
  const double m = std::ceil(C_m * d * std::log(std::max(n, 1.0) / delta));
  return std::max(1.0, m);
}

ProbeSource::ProbeSource(Stream rng, double m, int d)
    : rng_(rng), scale_(1.0 / std::sqrt(m)), d_(d), z_(d) {
  if (m < 1.0) throw ConfigError("probe scale m must be at least 1");
}

const Vec& ProbeSource::next() {
  for (;;) {
    for (int r = 0; r < d_; ++r) z_[r] = scale_ * rng_.normal();
    ++drawn_;
    if (z_.squaredNorm() <= 1.0) return z_;
    ++rejected_;
    if (rejected_ > 1000 && rejected_ * 2 > drawn_)
      throw AlgorithmError("most probes exceed the unit ball; raise m");
  }
}

void ProbeSource::check_batch(long long n) const {
  if (rejected_ == 0 || drawn_ == 0) return;
  const double q = static_cast<double>(rejected_) / static_cast<double>(drawn_);
  // Expected whole-batch redraws: (1 - q)^-n.
  const double log_retries = -static_cast<double>(n) * std::log1p(-q);
  if (log_retries > std::log(static_cast<double>(kMaxBatchRetries)))
    throw AlgorithmError("probe batch would need more than " +
                         std::to_string(kMaxBatchRetries) + " redraws; raise m");
}

Vec estimate_matrix_action(BanditSession& s, const Vec& a, long long n, double m, Stream rng,
                           EstimateStats* stats) {
  if (n < 1) throw ConfigError("batch size must be positive");
  const int d = s.model().d;
  ProbeSource src(rng, m, d);
  Vec acc = Vec::Zero(d);
  Vec act(d);
  for (long long i = 0; i < n; ++i) {
    const Vec& z = src.next();
    act = 0.5 * (a + z);
    const double r = s.pull_vec(act);
    acc.noalias() += r * z;
  }
  src.check_batch(n);
  if (stats) {
    stats->pulls += n;
    stats->rejected += src.rejected();
  }
  return acc * (m / static_cast<double>(n));
}

Vec expected_matrix_action(const RewardModel& model, const Vec& a) {
  if (model.kind != ModelKind::EV) throw ConfigError("matrix estimator needs an EV model");
  return 0.5 * (model.matrix() * a);
}

Vec estimate_tensor_G(BanditSession& s, const Vec& a, int p, long long n, double m, Stream rng,
                      EstimateStats* stats) {
  if (n < 1) throw ConfigError("batch size must be positive");
  if (p < 2) throw ConfigError("p must be at least 2");
  const int d = s.model().d;
  const double c = 1.0 / (2.0 * p);
  ProbeSource src(rng, m, d);
  Vec acc = Vec::Zero(d);
  Vec act(d);
  Vec ctl(d);
  for (long long i = 0; i < n; ++i) {
    const Vec& z = src.next();
    act = (1.0 - c) * a + c * z;
    ctl = c * z;
    const double r = s.pull_vec(act);
    const double rc = s.pull_vec(ctl);
    acc.noalias() += (r - rc) * z;
  }
  src.check_batch(n);
  if (stats) {
    stats->pulls += 2 * n;
    stats->rejected += src.rejected();
  }
  return acc * (m / static_cast<double>(n));
}

Vec closed_form_G(const RewardModel& model, const Vec& a, int p, double m) {
  require_sym(model);
  if (p < 3) throw ConfigError("closed_form_G needs p >= 3");
  const Mat& V = model.frames.at(0);
  const Vec c = V.transpose() * a;
  const double b = 1.0 - 1.0 / (2.0 * p);
  const double h = 1.0 / (2.0 * p);
  Vec g = Vec::Zero(model.d);
  for (int s = 0; 2 * s + 3 <= p; ++s) {
    const int j = 2 * s + 1;
    const double coef = binomial(p, j) * ipow(b, p - j) * ipow(h, j) * std::pow(m, -s) *
                        double_factorial(j);
    // With orthonormal components each contracted identity pair gives
    // ||v||^2 = 1, leaving sum_j lambda_j (v_j^T a)^(p-j) v_j.
    for (int q = 0; q < model.k; ++q) g += coef * model.lambdas[q] * ipow(c[q], p - j) * V.col(q);
  }
  return g;
}

double even_p_bias_coefficient(int p, double m) {
  if (p % 2 != 0) return 0.0;
  const double b = 1.0 - 1.0 / (2.0 * p);
  const double h = 1.0 / (2.0 * p);
  const int j = p - 1;
  return binomial(p, j) * b * ipow(h, j) * std::pow(m, -(p / 2 - 1)) * double_factorial(j);
}

Vec even_p_bias(const RewardModel& model, const Vec& a, int p, double m) {
  require_sym(model);
  Vec g = Vec::Zero(model.d);
  if (p % 2 != 0) return g;
  const Mat& V = model.frames.at(0);
  const Vec c = V.transpose() * a;
  const double e = even_p_bias_coefficient(p, m);
  for (int q = 0; q < model.k; ++q) g += e * model.lambdas[q] * c[q] * V.col(q);
  return g;
}

Vec expected_tensor_G(const RewardModel& model, const Vec& a, int p, double m) {
  Vec g = even_p_bias(model, a, p, m);
  if (p >= 3) g += closed_form_G(model, a, p, m);
  return g;
}

}  // namespace polybandit
