#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dqbrm/mdp.hpp"
#include "dqbrm/risk_measures.hpp"
#include "dqbrm/rng.hpp"

namespace dqbrm {

/// Q-factor table over (t, state-action index) for t = 0..T. The terminal
/// slice t = T is identically zero.
class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(int horizon, int pairs, double fill = 0.0);

  int horizon() const { return horizon_; }
  int pairs() const { return pairs_; }
  double at(int t, int idx) const { return data_[offset(t, idx)]; }
  double& at(int t, int idx) { return data_[offset(t, idx)]; }
  std::span<const double> slice(int t) const { return {data_.data() + offset(t, 0), std::size_t(pairs_)}; }
  std::span<double> slice(int t) { return {data_.data() + offset(t, 0), std::size_t(pairs_)}; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  friend bool operator==(const ValueTable&, const ValueTable&) = default;

 private:
  std::size_t offset(int t, int idx) const { return std::size_t(t) * pairs_ + idx; }

  int horizon_ = 0;
  int pairs_ = 0;
  std::vector<double> data_;
};

/// Auxiliary quantile iterates u^i_t(s, a) for i < m and t < T.
class AuxQuantileTable {
 public:
  AuxQuantileTable() = default;
  AuxQuantileTable(int levels, int horizon, int pairs, double fill = 0.0);

  int levels() const { return levels_; }
  int horizon() const { return horizon_; }
  int pairs() const { return pairs_; }
  double at(int i, int t, int idx) const { return data_[offset(i, t, idx)]; }
  double& at(int i, int t, int idx) { return data_[offset(i, t, idx)]; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  friend bool operator==(const AuxQuantileTable&, const AuxQuantileTable&) = default;

 private:
  std::size_t offset(int i, int t, int idx) const {
    return (std::size_t(i) * horizon_ + t) * pairs_ + idx;
  }

  int levels_ = 0;
  int horizon_ = 0;
  int pairs_ = 0;
  std::vector<double> data_;
};

/// Compact intervals X^u_t(s,a) and X^q_t(s,a) that every iterate is projected onto.
struct ProjectionBoxes {
  int horizon = 0;
  int pairs = 0;
  std::vector<double> u_lo, u_hi;  // horizon * pairs
  std::vector<double> q_lo, q_hi;  // (horizon + 1) * pairs, terminal slice [0, 0]

  // Symmetric boxes [-bound[t], bound[t]] for both tables.
  static ProjectionBoxes symmetric(int horizon, int pairs, std::span<const double> bound);
  // bound[t] = (T - t) * stage_cost_bound * (1 + sum_i 1 / (1 - alpha_i)).
  static ProjectionBoxes from_stage_cost_bound(int horizon, int pairs, const QbrmSpec& spec,
                                               double stage_cost_bound);

  void validate() const;
  bool contains(const ValueTable& q) const;
  bool contains(const AuxQuantileTable& u) const;
};

/// Harmonic stepsizes: gamma_t / (n0 + n) for the quantile iterates and
/// min(1, eta_t / (n0' + n)) for the value iterates, applied at the visited
/// pair only. The offsets default to 0.
struct StepsizeSchedule {
  std::vector<double> gamma;
  std::vector<double> eta;
  double gamma_offset = 0.0;
  double eta_offset = 0.0;

  static StepsizeSchedule constant(int horizon, double gamma, double eta, double gamma_offset = 0.0,
                                   double eta_offset = 0.0);

  double gamma_step(int t, std::int64_t n) const {
    return gamma[t] / (gamma_offset + static_cast<double>(n));
  }
  double eta_step(int t, std::int64_t n) const;
  void validate(int horizon) const;
};

struct SamplingPolicyConfig {
  // Exploration weight per pair; the trajectory explores with probability epsilon * d.
  double epsilon = 0.0;
};

/// Everything Dynamic-QBRM ADP needs besides its iterates.
struct AdpProblem {
  AdpProblem(std::shared_ptr<const MdpModel> model, QbrmSpec spec, ProjectionBoxes boxes,
             StepsizeSchedule steps, SamplingPolicyConfig sampling);

  std::shared_ptr<const MdpModel> model;
  StateActionSpace space;
  QbrmSpec spec;
  ProjectionBoxes boxes;
  StepsizeSchedule steps;
  SamplingPolicyConfig sampling;

  int horizon() const { return model->horizon(); }
  int pairs() const { return space.size(); }
};

struct AdpState {
  ValueTable q;
  AuxQuantileTable u;
  std::int64_t iteration = 0;
};

// Q = u = 0 projected into the boxes.
AdpState initial_state(const AdpProblem& problem);

// c_t(s,a,w) + min_{a'} q_next(S^M(s,a,w), a'), internal (minimization) units.
double future_cost(const MdpModel& model, const StateActionSpace& space,
                   std::span<const double> q_next, int t, int s, int a, const Noise& w);

// 1 - 1{future_cost >= u} / (1 - alpha).
double psi_gradient(double u, double future_cost, double alpha);
double psi_gradient(const AdpProblem& problem, double u, std::span<const double> q_next, int t,
                    int s, int a, const Noise& w, double alpha);

// Phi(future_cost, u_1..u_m).
double bellman_sample(const AdpProblem& problem, std::span<const double> u_all,
                      std::span<const double> q_next, int t, int s, int a, const Noise& w);

// clamp(u - step * psi, lo, hi)
double aux_step(double u, double psi, double step, double lo, double hi);
// clamp((1 - step) q + step q_hat, lo, hi)
double value_step(double q, double q_hat, double step, double lo, double hi);

void update_aux(const AdpProblem& problem, AuxQuantileTable& u, const ValueTable& q, int t,
                int pair, const Noise& w_u, std::int64_t n);
void update_value(const AdpProblem& problem, ValueTable& q, int t, int pair, double q_hat,
                  std::int64_t n);

/// Next visited pair: the greedy successor under q.slice(t+1) with
/// probability 1 - epsilon d, otherwise uniform over all d pairs.
int epsilon_greedy_next(const AdpProblem& problem, const ValueTable& q, int t, int s, int a,
                        const Noise& w, RngStream& rng);

struct TraceRecord {
  std::int64_t n = 0;
  int first_pair = 0;
  std::optional<double> err_inf;
  std::optional<double> err_l2;
  std::int64_t lr_cap_hits = 0;
  std::vector<double> watched_q;
  std::vector<std::vector<double>> watched_u;  // [level][watched pair]
};

struct WatchedPair {
  int t;
  int pair;
  friend bool operator==(const WatchedPair&, const WatchedPair&) = default;
};

struct RunOptions {
  // 0 selects ceil(N / 1000).
  std::int64_t trace_every = 0;
  std::vector<WatchedPair> watched;
  std::shared_ptr<const ValueTable> reference;
  std::function<void(const TraceRecord&)> trace_sink;
  // Invoked after each listed iteration completes.
  std::vector<std::int64_t> checkpoints;
  std::function<void(std::int64_t n, const AdpState&)> on_checkpoint;
};

/// Runs N further iterations of Dynamic-QBRM ADP starting from `state`.
AdpState run(const AdpProblem& problem, AdpState state, std::int64_t iterations,
             const RngStreams& rng, const RunOptions& options = {});

PolicyTable extract_policy(const ValueTable& q, const StateActionSpace& space);

double max_abs_error(const ValueTable& a, const ValueTable& b);
double squared_l2_error(const ValueTable& a, const ValueTable& b);
double max_abs(const ValueTable& a);

}  // namespace dqbrm
