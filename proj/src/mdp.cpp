#include "dqbrm/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "dqbrm/errors.hpp"

namespace dqbrm {

StateActionSpace::StateActionSpace(const MdpModel& model) : num_actions_(model.num_actions()) {
  const int S = model.num_states();
  if (S <= 0 || num_actions_ <= 0) throw ConfigError("model needs at least one state and action");
  offsets_.reserve(S + 1);
  lookup_.assign(static_cast<std::size_t>(S) * num_actions_, -1);
  offsets_.push_back(0);
  for (int s = 0; s < S; ++s) {
    const auto feasible = model.feasible_actions(s);
    if (feasible.empty()) {
      throw ConfigError("state " + std::to_string(s) + " has no feasible action");
    }
    int prev = -1;
    for (int a : feasible) {
      if (a < 0 || a >= num_actions_ || a <= prev) {
        throw ConfigError("feasible actions of state " + std::to_string(s) +
                          " must be distinct, sorted and in range");
      }
      prev = a;
      lookup_[static_cast<std::size_t>(s) * num_actions_ + a] = static_cast<int>(pairs_.size());
      pairs_.emplace_back(s, a);
    }
    offsets_.push_back(static_cast<int>(pairs_.size()));
  }
}

int StateActionSpace::index(int s, int a) const {
  if (s < 0 || s >= num_states() || a < 0 || a >= num_actions_) return -1;
  return lookup_[static_cast<std::size_t>(s) * num_actions_ + a];
}

StepResult step(const MdpModel& model, int t, int s, int a, const Noise& w) {
  if (t < 0 || t >= model.horizon()) throw std::out_of_range("step: time index out of range");
  if (s < 0 || s >= model.num_states()) throw std::out_of_range("step: state out of range");
  const auto feasible = model.feasible_actions(s);
  if (!std::binary_search(feasible.begin(), feasible.end(), a)) {
    throw std::invalid_argument("step: action " + std::to_string(a) + " infeasible in state " +
                                std::to_string(s));
  }
  const int next = model.transition(t, s, a, w);
  if (next < 0 || next >= model.num_states()) {
    throw std::logic_error("step: transition left the state space");
  }
  return {model.cost(t, s, a, w), next};
}

Greedy greedy_value(std::span<const double> q_slice, const StateActionSpace& space, int s) {
  const int b = space.begin(s);
  const int e = space.end(s);
  Greedy g{q_slice[b], space.action_of(b), b};
  for (int i = b + 1; i < e; ++i) {
    if (q_slice[i] < g.value) g = {q_slice[i], space.action_of(i), i};
  }
  return g;
}

FunctionalMdp::FunctionalMdp(std::string name, int horizon, int num_states, int num_actions,
                             std::vector<std::vector<int>> feasible, TransitionFn transition,
                             CostFn cost, std::shared_ptr<const NoiseModel> noise, Sense sense)
    : name_(std::move(name)),
      horizon_(horizon),
      num_states_(num_states),
      num_actions_(num_actions),
      feasible_(std::move(feasible)),
      transition_(std::move(transition)),
      cost_(std::move(cost)),
      noise_(std::move(noise)),
      sense_(sense) {
  if (horizon_ < 1) throw ConfigError("horizon must be at least 1");
  if (static_cast<int>(feasible_.size()) != num_states_) {
    throw ConfigError("one feasible action list per state is required");
  }
  for (std::size_t s = 0; s < feasible_.size(); ++s) {
    const auto& acts = feasible_[s];
    if (acts.empty()) throw ConfigError("state " + std::to_string(s) + " has no feasible action");
    for (std::size_t k = 0; k < acts.size(); ++k) {
      if (acts[k] < 0 || acts[k] >= num_actions_ || (k > 0 && acts[k] <= acts[k - 1])) {
        throw ConfigError("state " + std::to_string(s) + ": feasible actions must be sorted, distinct and in range");
      }
    }
  }
  if (!noise_) throw ConfigError("model requires a noise law");
}

UniformBoxNoise::UniformBoxNoise(std::vector<double> lo, std::vector<double> hi)
    : lo_(std::move(lo)), hi_(std::move(hi)), density_(1.0) {
  if (lo_.empty() || lo_.size() != hi_.size() || lo_.size() > kMaxNoiseDim) {
    throw ConfigError("uniform noise: bad box dimension");
  }
  for (std::size_t k = 0; k < lo_.size(); ++k) {
    if (!(hi_[k] > lo_[k])) throw ConfigError("uniform noise: empty box");
    density_ /= hi_[k] - lo_[k];
  }
}

Noise UniformBoxNoise::sample(int, RngStream& rng) const {
  Noise w{};
  for (std::size_t k = 0; k < lo_.size(); ++k) w[k] = lo_[k] + (hi_[k] - lo_[k]) * rng.uniform();
  return w;
}

double UniformBoxNoise::pdf(int, const Noise& w) const {
  for (std::size_t k = 0; k < lo_.size(); ++k) {
    if (w[k] < lo_[k] || w[k] > hi_[k]) return 0.0;
  }
  return density_;
}

double UniformBoxNoise::marginal_quantile(int, int k, double p) const {
  return lo_[k] + p * (hi_[k] - lo_[k]);
}

NormalNoise::NormalNoise(double mean, double sd) : mean_(mean), sd_(sd) {
  if (!(sd_ > 0.0)) throw ConfigError("normal noise: standard deviation must be positive");
}

Noise NormalNoise::sample(int, RngStream& rng) const {
  Noise w{};
  w[0] = mean_ + sd_ * sample_standard_normal(rng);
  return w;
}

double NormalNoise::pdf(int, const Noise& w) const {
  return standard_normal_pdf((w[0] - mean_) / sd_) / sd_;
}

double NormalNoise::marginal_quantile(int, int, double p) const {
  return mean_ + sd_ * standard_normal_quantile(p);
}

double DegenerateNoise::pdf(int, const Noise& w) const {
  for (int k = 0; k < dim_; ++k) {
    if (w[k] != value_[k]) return 0.0;
  }
  return 1.0;
}

double standard_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double standard_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal quantile: p outside (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double sample_standard_normal(RngStream& rng) {
  std::normal_distribution<double> dist;
  return dist(rng);
}

}  // namespace dqbrm
