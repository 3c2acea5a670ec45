#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dqbrm/rng.hpp"

namespace dqbrm {

inline constexpr std::size_t kMaxNoiseDim = 4;

/// One realization of the exogenous information W_{t+1}. Only the first
/// NoiseModel::dim() components are meaningful.
using Noise = std::array<double, kMaxNoiseDim>;

enum class Sense { minimize, maximize };

/// Law of W_{t+1} for each decision epoch t. Independence across t is assumed
/// by the solvers and is the model author's responsibility.
class NoiseModel {
 public:
  virtual ~NoiseModel() = default;

  virtual int dim() const = 0;
  virtual Noise sample(int t, RngStream& rng) const = 0;
  virtual double pdf(int t, const Noise& w) const = 0;
  // Quantile of the k-th marginal at level p; used to size reference boxes.
  virtual double marginal_quantile(int t, int k, double p) const = 0;
};

/// Finite-horizon MDP with finite states 0..S-1 and actions 0..A-1.
///
/// Costs are reported in the model's natural sense. Solvers always minimize
/// internally and negate the costs of maximization models (see internal_cost).
class MdpModel {
 public:
  virtual ~MdpModel() = default;

  virtual std::string name() const = 0;
  virtual int horizon() const = 0;
  virtual int num_states() const = 0;
  virtual int num_actions() const = 0;
  // Nonempty, sorted ascending.
  virtual std::span<const int> feasible_actions(int s) const = 0;
  virtual int transition(int t, int s, int a, const Noise& w) const = 0;
  virtual double cost(int t, int s, int a, const Noise& w) const = 0;
  virtual const NoiseModel& noise() const = 0;
  virtual std::shared_ptr<const NoiseModel> noise_ptr() const = 0;
  virtual Sense sense() const { return Sense::minimize; }
  virtual std::string action_label(int a) const { return std::to_string(a); }

  double sign() const { return sense() == Sense::maximize ? -1.0 : 1.0; }
  double internal_cost(int t, int s, int a, const Noise& w) const { return sign() * cost(t, s, a, w); }
  // Converts a value in the internal (minimization) convention back to natural units.
  double natural_value(double internal) const { return sign() * internal; }
};

/// The feasible state-action pairs U, enumerated state by state so that the
/// pairs of state s occupy the contiguous index range [begin(s), end(s)).
class StateActionSpace {
 public:
  explicit StateActionSpace(const MdpModel& model);

  int size() const { return static_cast<int>(pairs_.size()); }
  int num_states() const { return static_cast<int>(offsets_.size()) - 1; }
  int num_actions() const { return num_actions_; }
  int begin(int s) const { return offsets_[s]; }
  int end(int s) const { return offsets_[s + 1]; }
  int state_of(int idx) const { return pairs_[idx].first; }
  int action_of(int idx) const { return pairs_[idx].second; }
  std::pair<int, int> pair(int idx) const { return pairs_[idx]; }
  // -1 when a is infeasible in s.
  int index(int s, int a) const;

 private:
  std::vector<std::pair<int, int>> pairs_;
  std::vector<int> offsets_;
  std::vector<int> lookup_;
  int num_actions_ = 0;
};

struct StepResult {
  double cost;
  int next_state;
};

// Checked single transition in natural units.
StepResult step(const MdpModel& model, int t, int s, int a, const Noise& w);

struct Greedy {
  double value;
  int action;
  int pair;
};

/// Minimum of q_slice over the feasible actions of s, ties to the lowest action.
Greedy greedy_value(std::span<const double> q_slice, const StateActionSpace& space, int s);

// Min over feasible actions only, no argmin bookkeeping.
inline double greedy_min(const double* q_slice, const StateActionSpace& space, int s) {
  const int b = space.begin(s);
  const int e = space.end(s);
  double best = q_slice[b];
  for (int i = b + 1; i < e; ++i) best = q_slice[i] < best ? q_slice[i] : best;
  return best;
}

/// Deterministic Markov policy: one feasible action per (t, s).
struct PolicyTable {
  PolicyTable() = default;
  PolicyTable(int horizon, int num_states, int fill = 0)
      : horizon(horizon), num_states(num_states), actions(std::size_t(horizon) * num_states, fill) {}

  int horizon = 0;
  int num_states = 0;
  std::vector<int> actions;

  int at(int t, int s) const { return actions[std::size_t(t) * num_states + s]; }
  int& at(int t, int s) { return actions[std::size_t(t) * num_states + s]; }

  friend bool operator==(const PolicyTable&, const PolicyTable&) = default;
};

/// Model assembled from callables; convenient for small test problems.
class FunctionalMdp : public MdpModel {
 public:
  using TransitionFn = std::function<int(int t, int s, int a, const Noise& w)>;
  using CostFn = std::function<double(int t, int s, int a, const Noise& w)>;

  FunctionalMdp(std::string name, int horizon, int num_states, int num_actions,
                std::vector<std::vector<int>> feasible, TransitionFn transition, CostFn cost,
                std::shared_ptr<const NoiseModel> noise, Sense sense = Sense::minimize);

  std::string name() const override { return name_; }
  int horizon() const override { return horizon_; }
  int num_states() const override { return num_states_; }
  int num_actions() const override { return num_actions_; }
  std::span<const int> feasible_actions(int s) const override { return feasible_[s]; }
  int transition(int t, int s, int a, const Noise& w) const override { return transition_(t, s, a, w); }
  double cost(int t, int s, int a, const Noise& w) const override { return cost_(t, s, a, w); }
  const NoiseModel& noise() const override { return *noise_; }
  std::shared_ptr<const NoiseModel> noise_ptr() const override { return noise_; }
  Sense sense() const override { return sense_; }

 private:
  std::string name_;
  int horizon_;
  int num_states_;
  int num_actions_;
  std::vector<std::vector<int>> feasible_;
  TransitionFn transition_;
  CostFn cost_;
  std::shared_ptr<const NoiseModel> noise_;
  Sense sense_;
};

/// Independent uniform components on a box, identical for every t.
class UniformBoxNoise : public NoiseModel {
 public:
  UniformBoxNoise(std::vector<double> lo, std::vector<double> hi);

  int dim() const override { return static_cast<int>(lo_.size()); }
  Noise sample(int t, RngStream& rng) const override;
  double pdf(int t, const Noise& w) const override;
  double marginal_quantile(int t, int k, double p) const override;

 private:
  std::vector<double> lo_;
  std::vector<double> hi_;
  double density_;
};

/// One-dimensional normal N(mean, sd^2), identical for every t.
class NormalNoise : public NoiseModel {
 public:
  NormalNoise(double mean, double sd);

  int dim() const override { return 1; }
  Noise sample(int t, RngStream& rng) const override;
  double pdf(int t, const Noise& w) const override;
  double marginal_quantile(int t, int k, double p) const override;

 private:
  double mean_;
  double sd_;
};

/// Point mass at a fixed value; pdf reports 1 at the atom.
class DegenerateNoise : public NoiseModel {
 public:
  explicit DegenerateNoise(Noise value, int dim = 1) : value_(value), dim_(dim) {}

  int dim() const override { return dim_; }
  Noise sample(int, RngStream&) const override { return value_; }
  double pdf(int, const Noise& w) const override;
  double marginal_quantile(int, int k, double) const override { return value_[k]; }

 private:
  Noise value_;
  int dim_;
};

double standard_normal_pdf(double z);
double standard_normal_quantile(double p);
double sample_standard_normal(RngStream& rng);

}  // namespace dqbrm
