#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "polybandit/common.hpp"
#include "polybandit/rng.hpp"
#include "polybandit/trace.hpp"

namespace polybandit {

enum class ModelKind { EV, LR, SYM, ASYM, POLY_LOWRANK, POLY_QUX, HARDCASE };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);

class InvalidAction : public Error {
 public:
  using Error::Error;
};

constexpr double kNormTol = 1e-9;

struct RewardModel {
  ModelKind kind = ModelKind::EV;
  int d = 1;
  int k = 1;
  int p = 2;
  std::vector<double> lambdas;
  // One d x k frame, or p frames for ASYM.
  std::vector<Mat> frames;
  // POLY_QUX: order-p tensor over dimension d+1, row-major flattened.
  Vec theta;
  // HARDCASE: strictly increasing 0-based indices.
  std::vector<int> alpha_star;
  std::uint64_t seed = 0;
  // Skip the lambda_1 <= 1 scale bound (shifted models used for analysis).
  bool unbounded_scale = false;

  // Sum lambda_j v_j v_j^T (EV, LR).
  Mat matrix() const;
  void validate() const;
};

// Convex weights over the hard-case vertex set, in lexicographic order of
// hardcase_vertices(d, p).  Weights may sum to less than one (the zero
// vertex absorbs the rest).
struct HullPoint {
  Vec weights;
};

using Action = std::variant<Vec, Mat, std::vector<Vec>, HullPoint>;

// All strictly increasing p-tuples over {0..d-1}, lexicographic.
std::vector<std::vector<int>> hardcase_vertices(int d, int p);
Vec hull_to_dense(const HullPoint& h, int d, int p);

double eval_vec(const RewardModel& model, const Vec& a);
double eval_mat(const RewardModel& model, const Mat& A);
double eval_tuple(const RewardModel& model, const std::vector<Vec>& a);
double eval_hull(const RewardModel& model, const HullPoint& h);
double eval_mean(const RewardModel& model, const Action& a);

// Throws InvalidAction on dimension mismatch or norm violation.
void validate_action(const RewardModel& model, const Action& a);

struct Optimum {
  double r_star = 0.0;
  Action action;
};
Optimum optimal_reward(const RewardModel& model);

// spectrum empty: sampled subject to the class constraints.
RewardModel make_random_model(ModelKind kind, int d, int k, int p,
                              const std::vector<double>& spectrum, std::uint64_t seed);
RewardModel make_hardcase_model(int d, int p, const std::vector<int>& alpha_star);

std::string model_to_json(const RewardModel& model);
RewardModel model_from_json(const std::string& text);

struct RegretLedger {
  long long t = 0;
  double cumulative_regret = 0.0;
  double r_star = 0.0;
  std::size_t ring_capacity = 64;
  std::deque<double> recent;

  void add(double instantaneous, long long count = 1);
};

// Model + noise law + step counter + regret ledger + RNG stream.
class BanditSession {
 public:
  BanditSession(std::shared_ptr<const RewardModel> model, double sigma_noise, std::uint64_t seed,
                long long budget = -1);

  double pull(const Action& a);
  double pull_vec(const Vec& a);
  double pull_mat(const Mat& A);
  double pull_tuple(const std::vector<Vec>& a);
  double pull_hull(const HullPoint& h);
  // LR action x z^T without forming the matrix; Frobenius norm ||x|| ||z||.
  double pull_rank1(const Vec& x, const Vec& z);
  // Plays a fixed action count times; returns the summed reward.
  double pull_repeated(const Action& a, long long count);

  const RewardModel& model() const { return *model_; }
  std::shared_ptr<const RewardModel> model_ptr() const { return model_; }
  const RegretLedger& ledger() const { return ledger_; }
  double r_star() const { return ledger_.r_star; }
  const Action& optimal_action() const { return optimum_.action; }
  long long t() const { return ledger_.t; }
  long long budget() const { return budget_; }
  long long remaining() const { return budget_ < 0 ? -1 : budget_ - ledger_.t; }
  double sigma() const { return sigma_; }

  // Trace capture: a row every `stride` steps plus one per phase change.
  void attach_trace(RegretTrace* trace, long long stride);
  void set_phase(const std::string& phase);
  const std::string& phase() const { return phase_; }
  void flush_trace();

 private:
  double finish_pull(double mean);
  void check_budget(long long count) const;
  void record_row(double inst);

  std::shared_ptr<const RewardModel> model_;
  double sigma_;
  long long budget_;
  Stream noise_;
  RegretLedger ledger_;
  Optimum optimum_;
  RegretTrace* trace_ = nullptr;
  long long stride_ = 1;
  long long next_row_ = 1;
  std::string phase_ = "run";
  double last_inst_ = 0.0;
};

}  // namespace polybandit
