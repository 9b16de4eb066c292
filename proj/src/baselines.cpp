#include "polybandit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polybandit/linalg.hpp"

namespace polybandit {

namespace {

// Nondecreasing p-tuples over {0..n-1}.
std::vector<std::vector<int>> multisets(int n, int p) {
  std::vector<std::vector<int>> out;
  std::vector<int> idx(p, 0);
  if (p == 0) return {{}};
  for (;;) {
    out.push_back(idx);
    int i = p - 1;
    while (i >= 0 && idx[i] == n - 1) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < p; ++j) idx[j] = idx[i];
  }
  return out;
}

// p! / prod(counts!) for a sorted multiset.
double multiplicity(const std::vector<int>& ms) {
  double r = 1.0;
  const int p = static_cast<int>(ms.size());
  for (int i = 2; i <= p; ++i) r *= i;
  int run = 1;
  for (int i = 1; i <= p; ++i) {
    if (i < p && ms[i] == ms[i - 1]) {
      ++run;
    } else {
      for (int j = 2; j <= run; ++j) r /= j;
      run = 1;
    }
  }
  return r;
}

struct LiftTable {
  std::vector<std::vector<int>> sets;
  std::vector<double> root_mult;
};

const LiftTable& lift_table(int d, int p) {
  thread_local int cached_d = -1, cached_p = -1;
  thread_local LiftTable table;
  if (d != cached_d || p != cached_p) {
    table.sets = multisets(d + 1, p);
    table.root_mult.clear();
    for (const auto& ms : table.sets) table.root_mult.push_back(std::sqrt(multiplicity(ms)));
    cached_d = d;
    cached_p = p;
  }
  return table;
}

constexpr long long kLiftCap = 10000000;

double lift_dim(int d, int p) { return binomial(d + p, p); }

}  // namespace

FiniteUcbResult run_finite_ucb(BanditSession& s, const std::vector<Action>& arms, long long T,
                               double delta) {
  if (arms.empty()) throw ConfigError("finite UCB needs at least one arm");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  for (const Action& a : arms) validate_action(s.model(), a);
  const std::size_t K = arms.size();
  FiniteUcbResult res;
  res.stats.counts.assign(K, 0);
  res.stats.means.assign(K, 0.0);
  if (T <= 0) return res;
  if (K == 1) {
    const double total = s.pull_repeated(arms[0], T);
    res.stats.counts[0] = T;
    res.stats.means[0] = total / static_cast<double>(T);
    res.plays = T;
    return res;
  }
  const double logterm = std::log(static_cast<double>(T) * K / delta);
  std::vector<double> sums(K, 0.0);
  for (long long t = 0; t < T; ++t) {
    std::size_t pick = 0;
    if (static_cast<std::size_t>(t) < K) {
      pick = static_cast<std::size_t>(t);
    } else {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < K; ++i) {
        const double idx = res.stats.means[i] +
                           std::sqrt(logterm / static_cast<double>(res.stats.counts[i]));
        if (idx > best) {
          best = idx;
          pick = i;
        }
      }
    }
    sums[pick] += s.pull(arms[pick]);
    ++res.stats.counts[pick];
    res.stats.means[pick] = sums[pick] / static_cast<double>(res.stats.counts[pick]);
  }
  res.plays = T;
  return res;
}

Vec symmetric_lift(const Vec& a, int p) {
  const int d = static_cast<int>(a.size());
  if (p < 1) throw ConfigError("lift degree must be positive");
  if (lift_dim(d, p) > kLiftCap) throw ConfigError("lifted feature dimension exceeds the cap");
  const LiftTable& tb = lift_table(d, p);
  Vec x(static_cast<Eigen::Index>(tb.sets.size()));
  for (std::size_t i = 0; i < tb.sets.size(); ++i) {
    double v = tb.root_mult[i];
    for (int j : tb.sets[i]) v *= j == 0 ? 1.0 : a[j - 1];
    x[static_cast<Eigen::Index>(i)] = v;
  }
  return x;
}

Vec lift_parameter(const RewardModel& model, int p) {
  const int d = model.d;
  if (lift_dim(d, p) > kLiftCap) throw ConfigError("lifted feature dimension exceeds the cap");
  const LiftTable& tb = lift_table(d, p);
  Vec th = Vec::Zero(static_cast<Eigen::Index>(tb.sets.size()));
  switch (model.kind) {
    case ModelKind::EV:
    case ModelKind::SYM:
    case ModelKind::POLY_LOWRANK: {
      if (model.p != p) throw ConfigError("lift degree does not match the model");
      const Mat& V = model.frames[0];
      for (std::size_t i = 0; i < tb.sets.size(); ++i) {
        const auto& ms = tb.sets[i];
        if (ms[0] == 0) continue;  // homogeneous: no lower-degree terms
        double acc = 0.0;
        for (int j = 0; j < model.k; ++j) {
          double prod = model.lambdas[j];
          for (int c : ms) prod *= V(c - 1, j);
          acc += prod;
        }
        th[static_cast<Eigen::Index>(i)] = acc * tb.root_mult[i];
      }
      return th;
    }
    case ModelKind::POLY_QUX: {
      if (model.p != p) throw ConfigError("lift degree does not match the model");
      // Coefficient of a multiset = sum of theta over its orderings.
      const int n = d + 1;
      const long long total = model.theta.size();
      for (long long flat = 0; flat < total; ++flat) {
        std::vector<int> idx(p);
        long long r = flat;
        for (int q = p - 1; q >= 0; --q) {
          idx[q] = static_cast<int>(r % n);
          r /= n;
        }
        std::sort(idx.begin(), idx.end());
        const auto it = std::lower_bound(tb.sets.begin(), tb.sets.end(), idx);
        th[it - tb.sets.begin()] += model.theta[flat];
      }
      for (std::size_t i = 0; i < tb.sets.size(); ++i) th[static_cast<Eigen::Index>(i)] /= tb.root_mult[i];
      return th;
    }
    default:
      throw ConfigError("no lifted parameter for " + to_string(model.kind));
  }
}

Mat lifted_quadratic_matrix(const Vec& theta, int d) {
  const LiftTable& tb = lift_table(d, 2);
  if (theta.size() != static_cast<Eigen::Index>(tb.sets.size()))
    throw ConfigError("lifted parameter has wrong length");
  Mat M = Mat::Zero(d, d);
  for (std::size_t i = 0; i < tb.sets.size(); ++i) {
    const int a = tb.sets[i][0], b = tb.sets[i][1];
    if (a == 0) continue;
    const double coef = theta[static_cast<Eigen::Index>(i)] * tb.root_mult[i];
    if (a == b) {
      M(a - 1, a - 1) = coef;
    } else {
      M(a - 1, b - 1) = 0.5 * coef;
      M(b - 1, a - 1) = 0.5 * coef;
    }
  }
  return M;
}

namespace {

// Symmetric (d+1) x (d+1) form U with symmetric_lift(a, 2)^T u = [1, a]^T U [1, a].
Mat lifted_form(const Vec& u, int d) {
  const LiftTable& tb = lift_table(d, 2);
  Mat U(d + 1, d + 1);
  for (std::size_t i = 0; i < tb.sets.size(); ++i) {
    const int a = tb.sets[i][0], b = tb.sets[i][1];
    const double c = u[static_cast<Eigen::Index>(i)] * tb.root_mult[i];
    if (a == b) {
      U(a, a) = c;
    } else {
      U(a, b) = 0.5 * c;
      U(b, a) = 0.5 * c;
    }
  }
  return U;
}

}  // namespace

LinUcbResult run_lin_ucb_vectorized(BanditSession& s, const LinUcbParams& prm,
                                    std::uint64_t seed) {
  const RewardModel& model = s.model();
  if (model.kind == ModelKind::LR || model.kind == ModelKind::ASYM ||
      model.kind == ModelKind::HARDCASE)
    throw ConfigError("lifted LinUCB needs a vector-action model");
  if (prm.p < 1) throw ConfigError("degree must be positive");
  if (!(prm.lambda_ridge > 0.0)) throw ConfigError("ridge parameter must be positive");
  if (prm.grid < 0) throw ConfigError("grid size must be nonnegative");
  const int d = model.d;
  if (lift_dim(d, prm.p) > kLiftCap) throw ConfigError("lifted feature dimension exceeds the cap");
  const int D = static_cast<int>(lift_dim(d, prm.p));
  // A grid smaller than D leaves lifted directions unexplored.
  const int grid = prm.grid > 0 ? prm.grid : 2 * D;
  const bool quadratic = prm.p == 2;
  const bool track_eps = prm.stop_eps > 0.0 && model.kind == ModelKind::EV;
  const Vec* vstar = std::get_if<Vec>(&s.optimal_action());

  LinUcbResult res;
  res.feature_dim = D;
  res.grid = grid;
  Stream g = Stream::derive(seed, StreamTag::Baseline);
  std::vector<Vec> grid_actions;
  Mat Phi(D, grid);
  for (int i = 0; i < grid; ++i) {
    grid_actions.push_back(g.unit_sphere(d));
    Phi.col(i) = symmetric_lift(grid_actions.back(), prm.p);
  }
  // [1, a] per grid point, for the quadratic shortcut.
  Mat Atil(d + 1, grid);
  Atil.row(0).setOnes();
  for (int i = 0; i < grid; ++i) Atil.col(i).tail(d) = grid_actions[i];
  Mat W(d + 1, grid);
  Mat Vinv = Mat::Identity(D, D) / prm.lambda_ridge;
  Mat Vmat;
  Vec theta_true;
  if (prm.audit_every > 0) {
    Vmat = Mat::Identity(D, D) * prm.lambda_ridge;
    theta_true = lift_parameter(model, prm.p);
  }
  Vec theta = Vec::Zero(D);
  Vec means = Vec::Zero(grid);
  Vec widths = Phi.colwise().squaredNorm().transpose() / prm.lambda_ridge;
  const double sigma = s.sigma();
  Vec greedy = grid_actions[0];
  for (long long t = 1; t <= prm.T; ++t) {
    const double beta =
        prm.beta_scale *
        (sigma * std::sqrt(2.0 * std::log(1.0 / prm.delta) +
                           D * std::log(1.0 + static_cast<double>(t) / (prm.lambda_ridge * D))) +
         std::sqrt(prm.lambda_ridge) * prm.S);
    // Greedy candidate: maximizer of the estimated reward.
    if (quadratic) {
      const Mat Mh = lifted_quadratic_matrix(theta, d);
      // Warm-started power iteration on the shifted (PSD) estimate; a full
      // solve every 64 plays keeps it on the top eigenvector.
      if (t % 64 == 1) {
        greedy = top_eigvec(Mh);
      } else {
        const double c = Mh.norm();
        for (int it = 0; it < 8; ++it) {
          Vec next = Mh * greedy + c * greedy;
          const double nn = next.norm();
          if (!(nn > 0.0)) break;
          greedy = next / nn;
        }
      }
    } else {
      Eigen::Index bi = 0;
      means.maxCoeff(&bi);
      greedy = grid_actions[bi];
    }
    const Vec greedy_phi = symmetric_lift(greedy, prm.p);
    if (track_eps && vstar && t > 1 && tan_theta(greedy, *vstar) <= prm.stop_eps) {
      res.samples_to_eps = t - 1;
      break;
    }
    Eigen::Index best = -1;
    double best_ucb = -std::numeric_limits<double>::infinity();
    Vec ug;
    if (prm.greedy_arm) {
      ug.noalias() = Vinv.selfadjointView<Eigen::Lower>() * greedy_phi;
      best_ucb = greedy_phi.dot(theta) + beta * std::sqrt(std::max(0.0, greedy_phi.dot(ug)));
    }
    for (int i = 0; i < grid; ++i) {
      const double ucb = means[i] + beta * std::sqrt(std::max(0.0, widths[i]));
      if (ucb > best_ucb) {
        best_ucb = ucb;
        best = i;
      }
    }
    const Vec& act = best < 0 ? greedy : grid_actions[best];
    const Vec x = best < 0 ? greedy_phi : Vec(Phi.col(best));
    const double r = s.pull_vec(act);
    // Sherman-Morrison on the lower triangle of V^-1; theta, means and
    // widths follow from u = V^-1 x.
    Vec u;
    if (best < 0) u = std::move(ug);
    else u.noalias() = Vinv.selfadjointView<Eigen::Lower>() * x;
    const double denom = 1.0 + x.dot(u);
    const double resid = (r - x.dot(theta)) / denom;
    Vinv.selfadjointView<Eigen::Lower>().rankUpdate(u, -1.0 / denom);
    Vec pu;
    if (quadratic) {
      // phi(a)^T u = [1, a]^T U [1, a]: a small product instead of a pass
      // over the lifted grid.
      W.noalias() = lifted_form(u, d) * Atil;
      pu = Atil.cwiseProduct(W).colwise().sum().transpose();
    } else {
      pu.noalias() = Phi.transpose() * u;
    }
    widths.array() -= pu.array().square() / denom;
    theta += resid * u;
    means += resid * pu;
    res.plays = t;
    if (prm.audit_every > 0) {
      Vmat.noalias() += x * x.transpose();
      if (t % prm.audit_every == 0) {
        const Vec e = theta - theta_true;
        ++res.audits;
        if (e.dot(Vmat * e) <= beta * beta) ++res.covered;
      }
    }
  }
  res.theta = theta;
  res.greedy = greedy;
  return res;
}

PacToRegret pac_to_regret(double A, double a_exp, int p, double T, double r_star) {
  if (!(A > 0.0) || !(a_exp > 0.0) || !(T >= 1.0) || p < 1)
    throw ConfigError("pac_to_regret needs A > 0, a > 0, T >= 1, p >= 1");
  PacToRegret out;
  const double e = 1.0 / (a_exp + 2.0);
  out.zeta = std::pow(A / (T * p), e);
  out.T1 = A * std::pow(out.zeta, -a_exp);
  out.bound = std::pow(T, a_exp * e) * std::pow(static_cast<double>(p), a_exp * e) *
              std::pow(A, 2.0 * e) * r_star;
  return out;
}

EtcPlan tune_etc(const std::function<double(double)>& samples, int p, double T, double r_star,
                 double eps_min, double eps_max, int grid) {
  if (!(eps_min > 0.0 && eps_max > eps_min) || grid < 2)
    throw ConfigError("tune_etc needs 0 < eps_min < eps_max and grid >= 2");
  // A plan that cannot finish exploring within T is infeasible; when every
  // plan is, the cheapest one (eps_max) is returned with the trivial bound.
  EtcPlan best;
  best.eps = eps_max;
  best.exploration = samples(eps_max);
  best.bound = T * r_star;
  bool feasible = false;
  for (int i = 0; i < grid; ++i) {
    const double eps = eps_min * std::pow(eps_max / eps_min, static_cast<double>(i) / (grid - 1));
    const double S = samples(eps);
    if (S > T) continue;
    const double b = S * r_star + (T - S) * r_star * std::min(2.0, p * eps * eps);
    if (!feasible || b < best.bound) {
      best.bound = b;
      best.eps = eps;
      best.exploration = S;
      feasible = true;
    }
  }
  return best;
}

FiniteUcbResult candidate_set_etc(BanditSession& s, const std::vector<Action>& pool, long long T,
                                  double delta) {
  if (pool.empty()) throw ConfigError("candidate set is empty");
  const long long rest = T - s.t();
  return run_finite_ucb(s, pool, std::max<long long>(0, rest), delta);
}

}  // namespace polybandit
