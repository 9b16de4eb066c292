#include "polybandit/env.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "polybandit/linalg.hpp"

namespace polybandit {

namespace {

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

std::size_t tensor_size(int dim, int p) {
  std::size_t n = 1;
  for (int i = 0; i < p; ++i) n *= static_cast<std::size_t>(dim);
  return n;
}

// Contract the trailing index of a row-major order-p tensor with x, p times.
double contract_full(const Vec& theta, int dim, int p, const Vec& x) {
  Vec cur = theta;
  for (int q = 0; q < p; ++q) {
    const Eigen::Index rows = cur.size() / dim;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> R(
        cur.data(), rows, dim);
    Vec next = R * x;
    cur = std::move(next);
  }
  return cur[0];
}

// Gradient of <theta, x^{(p)}> in x: sum over slots of the contraction with x
// everywhere except that slot.
Vec contract_grad(const Vec& theta, int dim, int p, const Vec& x) {
  Vec g = Vec::Zero(dim);
  const std::size_t n = static_cast<std::size_t>(theta.size());
  std::vector<int> idx(p, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t rem = flat;
    for (int q = p - 1; q >= 0; --q) {
      idx[q] = static_cast<int>(rem % dim);
      rem /= dim;
    }
    const double t = theta[static_cast<Eigen::Index>(flat)];
    if (t == 0.0) continue;
    for (int q = 0; q < p; ++q) {
      double prod = t;
      for (int r = 0; r < p; ++r)
        if (r != q) prod *= x[idx[r]];
      g[idx[q]] += prod;
    }
  }
  return g;
}

void check_frame(const Mat& V, int d, int k, const std::string& what) {
  if (V.rows() != d || V.cols() != k)
    throw ConfigError(what + ": frame has wrong shape");
  if (orthonormality_error(V) > 1e-9) throw ConfigError(what + ": frame is not orthonormal");
}

Vec poly_qux_argmax(const RewardModel& m, double* best_value) {
  Stream rng = Stream::derive(m.seed, StreamTag::Model, 99);
  const int D = m.d + 1;
  double best = -std::numeric_limits<double>::infinity();
  Vec best_a = Vec::Zero(m.d);
  const int starts = 48;
  for (int s = 0; s < starts; ++s) {
    Vec a = (s == 0) ? Vec::Zero(m.d) : Vec(rng.unit_sphere(m.d) * std::sqrt(rng.uniform()));
    double step = 0.5;
    for (int it = 0; it < 400; ++it) {
      Vec at(D);
      at[0] = 1.0;
      at.tail(m.d) = a;
      const Vec g = contract_grad(m.theta, D, m.p, at).tail(m.d);
      Vec cand = a + step * g;
      const double n = cand.norm();
      if (n > 1.0) cand /= n;
      at.tail(m.d) = cand;
      Vec at0(D);
      at0[0] = 1.0;
      at0.tail(m.d) = a;
      if (contract_full(m.theta, D, m.p, at) >= contract_full(m.theta, D, m.p, at0)) {
        a = cand;
      } else {
        step *= 0.5;
      }
      if (step < 1e-12) break;
    }
    Vec at(D);
    at[0] = 1.0;
    at.tail(m.d) = a;
    const double v = contract_full(m.theta, D, m.p, at);
    if (v > best) {
      best = v;
      best_a = a;
    }
  }
  *best_value = best;
  return best_a;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::EV: return "EV";
    case ModelKind::LR: return "LR";
    case ModelKind::SYM: return "SYM";
    case ModelKind::ASYM: return "ASYM";
    case ModelKind::POLY_LOWRANK: return "POLY-LOWRANK";
    case ModelKind::POLY_QUX: return "POLY-QUX";
    case ModelKind::HARDCASE: return "HARDCASE";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& s) {
  for (ModelKind k : {ModelKind::EV, ModelKind::LR, ModelKind::SYM, ModelKind::ASYM,
                      ModelKind::POLY_LOWRANK, ModelKind::POLY_QUX, ModelKind::HARDCASE}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown model kind: " + s);
}

Mat RewardModel::matrix() const {
  if (kind != ModelKind::EV && kind != ModelKind::LR)
    throw ConfigError("matrix() needs an EV or LR model");
  const Mat& V = frames.at(0);
  Mat M = Mat::Zero(d, d);
  for (int j = 0; j < k; ++j) M += lambdas[j] * V.col(j) * V.col(j).transpose();
  return M;
}

void RewardModel::validate() const {
  if (d < 1) throw ConfigError("d must be positive");
  if (kind == ModelKind::HARDCASE) {
    if (p < 1 || p > d) throw ConfigError("hard case needs 1 <= p <= d");
    if (static_cast<int>(alpha_star.size()) != p) throw ConfigError("alpha_star must have p entries");
    for (int i = 0; i < p; ++i) {
      if (alpha_star[i] < 0 || alpha_star[i] >= d) throw ConfigError("alpha_star out of range");
      if (i > 0 && alpha_star[i] <= alpha_star[i - 1])
        throw ConfigError("alpha_star must be strictly increasing");
    }
    return;
  }
  if (kind == ModelKind::POLY_QUX) {
    if (p < 1) throw ConfigError("p must be positive");
    if (static_cast<std::size_t>(theta.size()) != tensor_size(d + 1, p))
      throw ConfigError("theta has wrong size");
    return;
  }
  if (k < 1 || k > d) throw ConfigError("k must satisfy 1 <= k <= d");
  if (p < 2) throw ConfigError("p must be at least 2");
  if ((kind == ModelKind::EV || kind == ModelKind::LR) && p != 2)
    throw ConfigError("EV and LR models have p = 2");
  if (kind == ModelKind::LR && 2 * k > d) throw ConfigError("LR needs k <= d/2");
  if (static_cast<int>(lambdas.size()) != k) throw ConfigError("need exactly k eigenvalues");
  for (int j = 0; j < k; ++j) {
    if (lambdas[j] == 0.0) throw ConfigError("zero eigenvalue in a rank-k model");
    if (j > 0 && std::abs(lambdas[j]) > std::abs(lambdas[j - 1]))
      throw ConfigError("eigenvalues must be sorted by decreasing magnitude");
  }
  if (!unbounded_scale && lambdas[0] > 1.0) throw ConfigError("lambda_1 must be at most 1");
  if ((kind == ModelKind::EV || kind == ModelKind::SYM || kind == ModelKind::POLY_LOWRANK) &&
      lambdas[0] <= 0.0)
    throw ConfigError("lambda_1 must be positive");
  if (!unbounded_scale && kind == ModelKind::ASYM && std::abs(lambdas[0]) > 1.0)
    throw ConfigError("|lambda_1| must be at most 1");
  const std::size_t nf = kind == ModelKind::ASYM ? static_cast<std::size_t>(p) : 1;
  if (frames.size() != nf) throw ConfigError("wrong number of frames");
  for (const Mat& V : frames) check_frame(V, d, k, to_string(kind));
  if (kind == ModelKind::LR && !unbounded_scale) {
    double fro2 = 0.0;
    for (double l : lambdas) fro2 += l * l;
    if (std::sqrt(fro2) > 1.0 + 1e-12) throw ConfigError("LR model needs ||M||_F <= 1");
  }
}

std::vector<std::vector<int>> hardcase_vertices(int d, int p) {
  std::vector<std::vector<int>> out;
  if (p < 0 || p > d) return out;
  std::vector<int> idx(p);
  for (int i = 0; i < p; ++i) idx[i] = i;
  for (;;) {
    out.push_back(idx);
    int i = p - 1;
    while (i >= 0 && idx[i] == d - p + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < p; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

Vec hull_to_dense(const HullPoint& h, int d, int p) {
  const auto verts = hardcase_vertices(d, p);
  if (static_cast<std::size_t>(h.weights.size()) != verts.size())
    throw InvalidAction("hull weights have wrong length");
  Vec x = Vec::Zero(d);
  for (std::size_t b = 0; b < verts.size(); ++b) {
    const double w = h.weights[static_cast<Eigen::Index>(b)];
    if (w == 0.0) continue;
    for (int j : verts[b]) x[j] += w;
  }
  return x;
}

double eval_vec(const RewardModel& m, const Vec& a) {
  switch (m.kind) {
    case ModelKind::EV: {
      const Vec c = m.frames[0].transpose() * a;
      double f = 0.0;
      for (int j = 0; j < m.k; ++j) f += m.lambdas[j] * c[j] * c[j];
      return f;
    }
    case ModelKind::SYM:
    case ModelKind::POLY_LOWRANK: {
      const Vec c = m.frames[0].transpose() * a;
      double f = 0.0;
      for (int j = 0; j < m.k; ++j) f += m.lambdas[j] * ipow(c[j], m.p);
      return f;
    }
    case ModelKind::POLY_QUX: {
      Vec at(m.d + 1);
      at[0] = 1.0;
      at.tail(m.d) = a;
      return contract_full(m.theta, m.d + 1, m.p, at);
    }
    case ModelKind::HARDCASE: {
      double f = 1.0;
      for (int i : m.alpha_star) f *= a[i];
      return f;
    }
    default:
      throw InvalidAction("vector action not valid for " + to_string(m.kind));
  }
}

double eval_mat(const RewardModel& m, const Mat& A) {
  if (m.kind != ModelKind::LR) throw InvalidAction("matrix action needs an LR model");
  const Mat& V = m.frames[0];
  double f = 0.0;
  for (int j = 0; j < m.k; ++j) f += m.lambdas[j] * V.col(j).dot(A * V.col(j));
  return f;
}

double eval_tuple(const RewardModel& m, const std::vector<Vec>& a) {
  if (m.kind != ModelKind::ASYM) throw InvalidAction("tuple action needs an ASYM model");
  double f = 0.0;
  for (int j = 0; j < m.k; ++j) {
    double prod = m.lambdas[j];
    for (int q = 0; q < m.p; ++q) prod *= m.frames[q].col(j).dot(a[q]);
    f += prod;
  }
  return f;
}

double eval_hull(const RewardModel& m, const HullPoint& h) {
  if (m.kind != ModelKind::HARDCASE) throw InvalidAction("hull action needs a HARDCASE model");
  return eval_vec(m, hull_to_dense(h, m.d, m.p));
}

double eval_mean(const RewardModel& m, const Action& a) {
  return std::visit(
      [&](const auto& x) -> double {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Vec>) return eval_vec(m, x);
        else if constexpr (std::is_same_v<T, Mat>) return eval_mat(m, x);
        else if constexpr (std::is_same_v<T, HullPoint>) return eval_hull(m, x);
        else return eval_tuple(m, x);
      },
      a);
}

void validate_action(const RewardModel& m, const Action& a) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Vec>) {
          if (m.kind == ModelKind::LR || m.kind == ModelKind::ASYM)
            throw InvalidAction("vector action not valid for " + to_string(m.kind));
          if (x.size() != m.d) throw InvalidAction("action dimension mismatch");
          if (m.kind == ModelKind::HARDCASE) {
            throw InvalidAction("hard-case actions are given as hull weights");
          }
          if (x.norm() > 1.0 + kNormTol) throw InvalidAction("action outside the unit ball");
        } else if constexpr (std::is_same_v<T, Mat>) {
          if (m.kind != ModelKind::LR) throw InvalidAction("matrix action needs an LR model");
          if (x.rows() != m.d || x.cols() != m.d) throw InvalidAction("action dimension mismatch");
          if (x.norm() > 1.0 + kNormTol) throw InvalidAction("action outside the Frobenius ball");
        } else if constexpr (std::is_same_v<T, HullPoint>) {
          if (m.kind != ModelKind::HARDCASE) throw InvalidAction("hull action needs HARDCASE");
          if (static_cast<std::size_t>(x.weights.size()) != hardcase_vertices(m.d, m.p).size())
            throw InvalidAction("hull weights have wrong length");
          if (x.weights.minCoeff() < -kNormTol || x.weights.sum() > 1.0 + kNormTol)
            throw InvalidAction("hull weights are not a sub-convex combination");
        } else {
          if (m.kind != ModelKind::ASYM) throw InvalidAction("tuple action needs an ASYM model");
          if (static_cast<int>(x.size()) != m.p) throw InvalidAction("tuple must have p slots");
          for (const Vec& s : x) {
            if (s.size() != m.d) throw InvalidAction("action dimension mismatch");
            if (s.norm() > 1.0 + kNormTol) throw InvalidAction("slot outside the unit ball");
          }
        }
      },
      a);
}

Optimum optimal_reward(const RewardModel& m) {
  Optimum o;
  switch (m.kind) {
    case ModelKind::EV:
    case ModelKind::SYM: {
      o.r_star = m.lambdas[0];
      Vec v = m.frames[0].col(0);
      o.action = v;
      break;
    }
    case ModelKind::POLY_LOWRANK: {
      // Orthonormal components: the maximum sits on a single component.
      int best = 0;
      double val = -1.0;
      double sign = 1.0;
      for (int j = 0; j < m.k; ++j) {
        const double plus = m.lambdas[j];
        const double minus = (m.p % 2 == 0) ? m.lambdas[j] : -m.lambdas[j];
        if (plus > val) { val = plus; best = j; sign = 1.0; }
        if (minus > val) { val = minus; best = j; sign = -1.0; }
      }
      if (val <= 0.0) {
        o.r_star = 0.0;
        o.action = Vec(Vec::Zero(m.d));
      } else {
        o.r_star = val;
        o.action = Vec(sign * m.frames[0].col(best));
      }
      break;
    }
    case ModelKind::LR: {
      const Mat M = m.matrix();
      o.r_star = M.norm();
      o.action = Mat(M / o.r_star);
      break;
    }
    case ModelKind::ASYM: {
      std::vector<Vec> a;
      for (int q = 0; q < m.p; ++q) a.push_back(m.frames[q].col(0));
      if (m.lambdas[0] < 0) a[0] = -a[0];
      o.r_star = std::abs(m.lambdas[0]);
      o.action = a;
      break;
    }
    case ModelKind::HARDCASE: {
      const auto verts = hardcase_vertices(m.d, m.p);
      HullPoint h;
      h.weights = Vec::Zero(static_cast<Eigen::Index>(verts.size()));
      for (std::size_t b = 0; b < verts.size(); ++b)
        if (verts[b] == m.alpha_star) h.weights[static_cast<Eigen::Index>(b)] = 1.0;
      o.r_star = 1.0;
      o.action = h;
      break;
    }
    case ModelKind::POLY_QUX: {
      double v = 0.0;
      Vec a = poly_qux_argmax(m, &v);
      o.r_star = v;
      o.action = a;
      break;
    }
  }
  return o;
}

RewardModel make_random_model(ModelKind kind, int d, int k, int p,
                              const std::vector<double>& spectrum, std::uint64_t seed) {
  RewardModel m;
  m.kind = kind;
  m.d = d;
  m.k = k;
  m.p = (kind == ModelKind::EV || kind == ModelKind::LR) ? 2 : p;
  m.seed = seed;
  Stream rng = Stream::derive(seed, StreamTag::Model);
  if (d < 1) throw ConfigError("d must be positive");
  if (kind == ModelKind::HARDCASE) {
    if (p < 1 || p > d) throw ConfigError("hard case needs 1 <= p <= d");
    std::vector<int> perm(d);
    for (int i = 0; i < d; ++i) perm[i] = i;
    for (int i = d - 1; i > 0; --i) {
      const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(perm[i], perm[j]);
    }
    std::vector<int> alpha(perm.begin(), perm.begin() + p);
    std::sort(alpha.begin(), alpha.end());
    RewardModel h = make_hardcase_model(d, p, alpha);
    h.seed = seed;
    return h;
  }
  if (kind == ModelKind::POLY_QUX) {
    if (p < 1) throw ConfigError("p must be positive");
    const std::size_t n = tensor_size(d + 1, p);
    if (n > 10'000'000) throw ConfigError("tensor too large");
    m.k = 1;
    m.theta.resize(static_cast<Eigen::Index>(n));
    for (auto& x : m.theta) x = rng.normal();
    m.theta /= m.theta.cwiseAbs().sum();
    m.validate();
    return m;
  }
  if (k < 1 || k > d) throw ConfigError("k must satisfy 1 <= k <= d");
  if (!spectrum.empty()) {
    if (static_cast<int>(spectrum.size()) != k) throw ConfigError("spectrum needs k entries");
    m.lambdas = spectrum;
  } else {
    std::vector<double> lam(k);
    lam[0] = 1.0;
    for (int j = 1; j < k; ++j) lam[j] = 0.1 + 0.8 * rng.uniform();
    std::sort(lam.begin() + 1, lam.end(), std::greater<double>());
    if (kind == ModelKind::LR) {
      double s = 0.0;
      for (double l : lam) s += l * l;
      for (double& l : lam) l /= std::sqrt(s);
    }
    m.lambdas = lam;
  }
  const int nf = kind == ModelKind::ASYM ? m.p : 1;
  for (int q = 0; q < nf; ++q) m.frames.push_back(random_orthonormal(d, k, rng));
  m.validate();
  return m;
}

RewardModel make_hardcase_model(int d, int p, const std::vector<int>& alpha_star) {
  RewardModel m;
  m.kind = ModelKind::HARDCASE;
  m.d = d;
  m.p = p;
  m.k = 1;
  m.lambdas = {1.0};
  m.alpha_star = alpha_star;
  m.validate();
  return m;
}

std::string model_to_json(const RewardModel& m) {
  nlohmann::json j;
  j["kind"] = to_string(m.kind);
  j["d"] = m.d;
  j["k"] = m.k;
  j["p"] = m.p;
  j["lambdas"] = m.lambdas;
  nlohmann::json frames = nlohmann::json::array();
  for (const Mat& V : m.frames) {
    std::vector<double> flat;
    for (Eigen::Index i = 0; i < V.rows(); ++i)
      for (Eigen::Index c = 0; c < V.cols(); ++c) flat.push_back(V(i, c));
    frames.push_back(flat);
  }
  j["frames"] = frames;
  if (m.theta.size() > 0) j["theta"] = std::vector<double>(m.theta.begin(), m.theta.end());
  if (!m.alpha_star.empty()) j["alpha_star"] = m.alpha_star;
  j["seed"] = m.seed;
  return j.dump();
}

RewardModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model json: ") + e.what());
  }
  RewardModel m;
  try {
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.d = j.at("d").get<int>();
    m.k = j.at("k").get<int>();
    m.p = j.at("p").get<int>();
    m.lambdas = j.at("lambdas").get<std::vector<double>>();
    for (const auto& f : j.at("frames")) {
      const auto flat = f.get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(m.d) * m.k)
        throw ConfigError("frame has wrong number of entries");
      Mat V(m.d, m.k);
      for (int i = 0; i < m.d; ++i)
        for (int c = 0; c < m.k; ++c) V(i, c) = flat[static_cast<std::size_t>(i) * m.k + c];
      m.frames.push_back(V);
    }
    if (j.contains("theta")) {
      const auto t = j["theta"].get<std::vector<double>>();
      m.theta = Eigen::Map<const Vec>(t.data(), static_cast<Eigen::Index>(t.size()));
    }
    if (j.contains("alpha_star")) m.alpha_star = j["alpha_star"].get<std::vector<int>>();
    m.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model json: ") + e.what());
  }
  m.validate();
  return m;
}

void RegretLedger::add(double instantaneous, long long count) {
  if (count <= 0) return;
  t += count;
  cumulative_regret += instantaneous * static_cast<double>(count);
  if (ring_capacity == 0) return;
  const long long keep = std::min<long long>(count, static_cast<long long>(ring_capacity));
  for (long long i = 0; i < keep; ++i) recent.push_back(instantaneous);
  while (recent.size() > ring_capacity) recent.pop_front();
}

BanditSession::BanditSession(std::shared_ptr<const RewardModel> model, double sigma_noise,
                             std::uint64_t seed, long long budget)
    : model_(std::move(model)),
      sigma_(sigma_noise),
      budget_(budget),
      noise_(Stream::derive(seed, StreamTag::Env)) {
  if (!model_) throw ConfigError("session needs a model");
  if (sigma_ < 0) throw ConfigError("sigma_noise must be nonnegative");
  model_->validate();
  optimum_ = optimal_reward(*model_);
  ledger_.r_star = optimum_.r_star;
}

void BanditSession::check_budget(long long count) const {
  if (budget_ >= 0 && ledger_.t + count > budget_)
    throw BudgetExhausted("budget of " + std::to_string(budget_) + " pulls exhausted");
}

double BanditSession::finish_pull(double mean) {
  double inst = ledger_.r_star - mean;
  // Floating-point slack at the optimum.
  if (std::abs(inst) < 1e-12) inst = 0.0;
  ledger_.add(inst);
  last_inst_ = inst;
  if (trace_ && ledger_.t >= next_row_) record_row(inst);
  return sigma_ > 0.0 ? mean + sigma_ * noise_.normal() : mean;
}

double BanditSession::pull_vec(const Vec& a) {
  check_budget(1);
  if (a.size() != model_->d) throw InvalidAction("action dimension mismatch");
  if (model_->kind == ModelKind::LR || model_->kind == ModelKind::ASYM ||
      model_->kind == ModelKind::HARDCASE)
    throw InvalidAction("vector action not valid for " + to_string(model_->kind));
  if (a.squaredNorm() > (1.0 + kNormTol) * (1.0 + kNormTol))
    throw InvalidAction("action outside the unit ball");
  return finish_pull(eval_vec(*model_, a));
}

double BanditSession::pull_mat(const Mat& A) {
  check_budget(1);
  validate_action(*model_, Action(A));
  return finish_pull(eval_mat(*model_, A));
}

double BanditSession::pull_tuple(const std::vector<Vec>& a) {
  check_budget(1);
  if (model_->kind != ModelKind::ASYM) throw InvalidAction("tuple action needs an ASYM model");
  if (static_cast<int>(a.size()) != model_->p) throw InvalidAction("tuple must have p slots");
  for (const Vec& s : a) {
    if (s.size() != model_->d) throw InvalidAction("action dimension mismatch");
    if (s.norm() > 1.0 + kNormTol) throw InvalidAction("slot outside the unit ball");
  }
  return finish_pull(eval_tuple(*model_, a));
}

double BanditSession::pull_rank1(const Vec& x, const Vec& z) {
  check_budget(1);
  if (model_->kind != ModelKind::LR) throw InvalidAction("rank-1 matrix action needs an LR model");
  if (x.size() != model_->d || z.size() != model_->d)
    throw InvalidAction("action dimension mismatch");
  if (x.norm() * z.norm() > 1.0 + kNormTol) throw InvalidAction("action outside the Frobenius ball");
  const Mat& V = model_->frames[0];
  const Vec cx = V.transpose() * x;
  const Vec cz = V.transpose() * z;
  double f = 0.0;
  for (int j = 0; j < model_->k; ++j) f += model_->lambdas[j] * cx[j] * cz[j];
  return finish_pull(f);
}

double BanditSession::pull_hull(const HullPoint& h) {
  check_budget(1);
  validate_action(*model_, Action(h));
  return finish_pull(eval_hull(*model_, h));
}

double BanditSession::pull(const Action& a) {
  return std::visit(
      [&](const auto& x) -> double {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Vec>) return pull_vec(x);
        else if constexpr (std::is_same_v<T, Mat>) return pull_mat(x);
        else if constexpr (std::is_same_v<T, HullPoint>) return pull_hull(x);
        else return pull_tuple(x);
      },
      a);
}

double BanditSession::pull_repeated(const Action& a, long long count) {
  if (count <= 0) return 0.0;
  check_budget(count);
  validate_action(*model_, a);
  const double mean = eval_mean(*model_, a);
  double inst = ledger_.r_star - mean;
  if (std::abs(inst) < 1e-12) inst = 0.0;
  if (trace_) {
    // Emit the rows that fall inside the block.
    const long long start = ledger_.t;
    const double cum0 = ledger_.cumulative_regret;
    while (next_row_ <= start + count) {
      TraceRow r;
      r.t = next_row_;
      r.cumulative_regret = cum0 + inst * static_cast<double>(next_row_ - start);
      r.instantaneous_regret = inst;
      r.phase = phase_;
      trace_->rows.push_back(r);
      next_row_ += stride_;
    }
  }
  ledger_.add(inst, count);
  last_inst_ = inst;
  const double total = mean * static_cast<double>(count);
  return sigma_ > 0.0 ? total + sigma_ * std::sqrt(static_cast<double>(count)) * noise_.normal()
                      : total;
}

void BanditSession::attach_trace(RegretTrace* trace, long long stride) {
  trace_ = trace;
  stride_ = std::max<long long>(1, stride);
  next_row_ = ledger_.t + 1;
}

void BanditSession::record_row(double inst) {
  TraceRow r;
  r.t = ledger_.t;
  r.cumulative_regret = ledger_.cumulative_regret;
  r.instantaneous_regret = inst;
  r.phase = phase_;
  trace_->rows.push_back(r);
  next_row_ = ledger_.t + stride_;
}

void BanditSession::set_phase(const std::string& phase) {
  if (phase == phase_) return;
  if (trace_ && ledger_.t > 0 && (trace_->rows.empty() || trace_->rows.back().t != ledger_.t))
    record_row(last_inst_);
  phase_ = phase;
}

void BanditSession::flush_trace() {
  if (trace_ && ledger_.t > 0 && (trace_->rows.empty() || trace_->rows.back().t != ledger_.t))
    record_row(last_inst_);
}

}  // namespace polybandit
