#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dqbrm/adp.hpp"
#include "dqbrm/mdp.hpp"
#include "dqbrm/risk_measures.hpp"
#include "dqbrm/rng.hpp"

namespace dqbrm {

/// Equal-weight noise realizations per decision epoch t = 0..T-1 (the draws of
/// W_{t+1}), shared by every state.
class ScenarioSet {
 public:
  ScenarioSet() = default;
  ScenarioSet(int dim, std::vector<std::vector<Noise>> draws);

  // Draws `count` realizations per t from the scenario substreams of `rng`.
  // The first k draws of a larger set coincide with a set of size k.
  static ScenarioSet sample(const NoiseModel& law, int horizon, int count, const RngStreams& rng);

  int horizon() const { return static_cast<int>(draws_.size()); }
  int dim() const { return dim_; }
  std::size_t count(int t) const { return draws_[t].size(); }
  std::span<const Noise> at(int t) const { return draws_[t]; }

  // CSV columns: t,draw,w0,..,w{dim-1}
  void save_csv(const std::filesystem::path& path) const;
  static ScenarioSet load_csv(const std::filesystem::path& path);
  void save_binary(const std::filesystem::path& path) const;
  static ScenarioSet load_binary(const std::filesystem::path& path);

  friend bool operator==(const ScenarioSet&, const ScenarioSet&) = default;

 private:
  int dim_ = 0;
  std::vector<std::vector<Noise>> draws_;
};

/// V_t(s) for t = 0..T in the model's natural units; V_T = 0.
class ValueFunctionSAA {
 public:
  ValueFunctionSAA() = default;
  ValueFunctionSAA(int horizon, int num_states)
      : horizon_(horizon), num_states_(num_states), data_(std::size_t(horizon + 1) * num_states, 0.0) {}

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  double at(int t, int s) const { return data_[std::size_t(t) * num_states_ + s]; }
  double& at(int t, int s) { return data_[std::size_t(t) * num_states_ + s]; }

 private:
  int horizon_ = 0;
  int num_states_ = 0;
  std::vector<double> data_;
};

struct SaaSolution {
  ValueFunctionSAA value;
  PolicyTable policy;
  // Q-factors in the internal (minimization) convention, comparable with ADP tables.
  ValueTable q;
};

ValueFunctionSAA evaluate_policy(const MdpModel& model, const QbrmSpec& spec,
                                 const PolicyTable& policy, const ScenarioSet& scenarios);

SaaSolution saa_optimal(const MdpModel& model, const QbrmSpec& spec, const ScenarioSet& scenarios);

// Best action for the one-stage risk of the immediate cost, ignoring continuation.
PolicyTable myopic_policy(const MdpModel& model, const QbrmSpec& spec, const ScenarioSet& scenarios);

// (v_pi - v_myopic) / (v_star - v_myopic). Throws DegenerateBenchmarkError when
// v_star == v_myopic.
double percent_optimality(double v_pi, double v_myopic, double v_star);

// Throws invalid_argument unless every action is feasible and the shape matches.
void validate_policy(const MdpModel& model, const PolicyTable& policy);

}  // namespace dqbrm
