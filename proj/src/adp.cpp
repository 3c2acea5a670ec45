#include "dqbrm/adp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adp_loop.hpp"
#include "dqbrm/errors.hpp"

namespace dqbrm {

ValueTable::ValueTable(int horizon, int pairs, double fill)
    : horizon_(horizon), pairs_(pairs), data_(std::size_t(horizon + 1) * pairs, fill) {
  if (horizon < 1 || pairs < 1) throw std::invalid_argument("value table: empty shape");
  std::fill(data_.begin() + static_cast<std::ptrdiff_t>(offset(horizon, 0)), data_.end(), 0.0);
}

AuxQuantileTable::AuxQuantileTable(int levels, int horizon, int pairs, double fill)
    : levels_(levels),
      horizon_(horizon),
      pairs_(pairs),
      data_(std::size_t(levels) * horizon * pairs, fill) {
  if (levels < 1 || horizon < 1 || pairs < 1) throw std::invalid_argument("aux table: empty shape");
}

ProjectionBoxes ProjectionBoxes::symmetric(int horizon, int pairs, std::span<const double> bound) {
  if (static_cast<int>(bound.size()) != horizon) {
    throw ConfigError("projection boxes: one bound per stage is required");
  }
  ProjectionBoxes b;
  b.horizon = horizon;
  b.pairs = pairs;
  const std::size_t nu = std::size_t(horizon) * pairs;
  b.u_lo.resize(nu);
  b.u_hi.resize(nu);
  b.q_lo.assign(nu + pairs, 0.0);
  b.q_hi.assign(nu + pairs, 0.0);
  for (int t = 0; t < horizon; ++t) {
    if (!(bound[t] >= 0.0) || !std::isfinite(bound[t])) {
      throw ConfigError("projection boxes: bounds must be finite and nonnegative");
    }
    for (int p = 0; p < pairs; ++p) {
      const std::size_t i = std::size_t(t) * pairs + p;
      b.u_lo[i] = b.q_lo[i] = -bound[t];
      b.u_hi[i] = b.q_hi[i] = bound[t];
    }
  }
  return b;
}

ProjectionBoxes ProjectionBoxes::from_stage_cost_bound(int horizon, int pairs, const QbrmSpec& spec,
                                                       double stage_cost_bound) {
  double factor = 1.0;
  for (double a : spec.levels().alphas()) factor += 1.0 / (1.0 - a);
  std::vector<double> bound(horizon);
  for (int t = 0; t < horizon; ++t) bound[t] = (horizon - t) * stage_cost_bound * factor;
  return symmetric(horizon, pairs, bound);
}

void ProjectionBoxes::validate() const {
  const std::size_t nu = std::size_t(horizon) * pairs;
  if (u_lo.size() != nu || u_hi.size() != nu || q_lo.size() != nu + pairs ||
      q_hi.size() != nu + pairs) {
    throw ConfigError("projection boxes: inconsistent sizes");
  }
  for (std::size_t i = 0; i < nu; ++i) {
    if (!(u_lo[i] <= u_hi[i]) || !std::isfinite(u_lo[i]) || !std::isfinite(u_hi[i])) {
      throw ConfigError("projection boxes: auxiliary interval is not compact");
    }
  }
  for (std::size_t i = 0; i < nu + pairs; ++i) {
    if (!(q_lo[i] <= q_hi[i]) || !std::isfinite(q_lo[i]) || !std::isfinite(q_hi[i])) {
      throw ConfigError("projection boxes: value interval is not compact");
    }
  }
}

bool ProjectionBoxes::contains(const ValueTable& q) const {
  const auto data = q.data();
  if (data.size() != q_lo.size()) return false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] < q_lo[i] || data[i] > q_hi[i]) return false;
  }
  return true;
}

bool ProjectionBoxes::contains(const AuxQuantileTable& u) const {
  const std::size_t nu = u_lo.size();
  const auto data = u.data();
  if (data.size() != nu * u.levels()) return false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t j = i % nu;
    if (data[i] < u_lo[j] || data[i] > u_hi[j]) return false;
  }
  return true;
}

StepsizeSchedule StepsizeSchedule::constant(int horizon, double gamma, double eta,
                                            double gamma_offset, double eta_offset) {
  return {std::vector<double>(horizon, gamma), std::vector<double>(horizon, eta), gamma_offset,
          eta_offset};
}

double StepsizeSchedule::eta_step(int t, std::int64_t n) const {
  return std::min(1.0, eta[t] / (eta_offset + static_cast<double>(n)));
}

void StepsizeSchedule::validate(int horizon) const {
  if (static_cast<int>(gamma.size()) != horizon || static_cast<int>(eta.size()) != horizon) {
    throw ConfigError("stepsizes: one gamma and one eta per stage are required");
  }
  for (int t = 0; t < horizon; ++t) {
    if (!(gamma[t] > 0.0) || !(eta[t] > 0.0)) throw ConfigError("stepsizes must be positive");
  }
  if (!(gamma_offset >= 0.0) || !(eta_offset >= 0.0)) {
    throw ConfigError("stepsize offsets must be nonnegative");
  }
}

AdpProblem::AdpProblem(std::shared_ptr<const MdpModel> model_in, QbrmSpec spec_in,
                       ProjectionBoxes boxes_in, StepsizeSchedule steps_in,
                       SamplingPolicyConfig sampling_in)
    : model(std::move(model_in)),
      space(*model),
      spec(std::move(spec_in)),
      boxes(std::move(boxes_in)),
      steps(std::move(steps_in)),
      sampling(sampling_in) {
  boxes.validate();
  if (boxes.horizon != model->horizon() || boxes.pairs != space.size()) {
    throw ConfigError("projection boxes do not match the model's state-action space");
  }
  steps.validate(model->horizon());
  if (!(sampling.epsilon >= 0.0) || sampling.epsilon * space.size() > 1.0 + 1e-12) {
    throw ConfigError("epsilon must satisfy 0 <= epsilon * d <= 1");
  }
}

AdpState initial_state(const AdpProblem& problem) {
  const int T = problem.horizon();
  const int d = problem.pairs();
  const int m = static_cast<int>(problem.spec.num_levels());
  AdpState state{ValueTable(T, d), AuxQuantileTable(m, T, d), 0};
  for (int t = 0; t <= T; ++t) {
    for (int p = 0; p < d; ++p) {
      const std::size_t b = std::size_t(t) * d + p;
      state.q.at(t, p) = std::clamp(0.0, problem.boxes.q_lo[b], problem.boxes.q_hi[b]);
      if (t < T) {
        for (int i = 0; i < m; ++i) {
          state.u.at(i, t, p) = std::clamp(0.0, problem.boxes.u_lo[b], problem.boxes.u_hi[b]);
        }
      }
    }
  }
  return state;
}

double future_cost(const MdpModel& model, const StateActionSpace& space,
                   std::span<const double> q_next, int t, int s, int a, const Noise& w) {
  const int next = model.transition(t, s, a, w);
  return model.internal_cost(t, s, a, w) + greedy_min(q_next.data(), space, next);
}

double psi_gradient(double u, double future_cost, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("psi: alpha outside (0, 1)");
  return future_cost >= u ? 1.0 - 1.0 / (1.0 - alpha) : 1.0;
}

double psi_gradient(const AdpProblem& problem, double u, std::span<const double> q_next, int t,
                    int s, int a, const Noise& w, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("psi: alpha outside (0, 1)");
  return psi_gradient(u, future_cost(*problem.model, problem.space, q_next, t, s, a, w), alpha);
}

double bellman_sample(const AdpProblem& problem, std::span<const double> u_all,
                      std::span<const double> q_next, int t, int s, int a, const Noise& w) {
  return phi(future_cost(*problem.model, problem.space, q_next, t, s, a, w), u_all, problem.spec);
}

double aux_step(double u, double psi, double step, double lo, double hi) {
  return std::clamp(u - step * psi, lo, hi);
}

double value_step(double q, double q_hat, double step, double lo, double hi) {
  return std::clamp((1.0 - step) * q + step * q_hat, lo, hi);
}

void update_aux(const AdpProblem& problem, AuxQuantileTable& u, const ValueTable& q, int t,
                int pair, const Noise& w_u, std::int64_t n) {
  const auto [s, a] = problem.space.pair(pair);
  const double fc = future_cost(*problem.model, problem.space, q.slice(t + 1), t, s, a, w_u);
  const double step = problem.steps.gamma_step(t, n);
  const std::size_t b = std::size_t(t) * problem.pairs() + pair;
  for (int i = 0; i < u.levels(); ++i) {
    double& ui = u.at(i, t, pair);
    ui = aux_step(ui, psi_gradient(ui, fc, problem.spec.levels()[i]), step,
                  problem.boxes.u_lo[b], problem.boxes.u_hi[b]);
  }
}

void update_value(const AdpProblem& problem, ValueTable& q, int t, int pair, double q_hat,
                  std::int64_t n) {
  const std::size_t b = std::size_t(t) * problem.pairs() + pair;
  double& v = q.at(t, pair);
  v = value_step(v, q_hat, problem.steps.eta_step(t, n), problem.boxes.q_lo[b],
                 problem.boxes.q_hi[b]);
}

int epsilon_greedy_next(const AdpProblem& problem, const ValueTable& q, int t, int s, int a,
                        const Noise& w, RngStream& rng) {
  const int d = problem.pairs();
  const double explore_prob = problem.sampling.epsilon * d;
  if (explore_prob > 1.0 + 1e-12) throw ConfigError("epsilon * d must not exceed 1");
  const int next_state = problem.model->transition(t, s, a, w);
  if (explore_prob > 0.0 && rng.uniform() < explore_prob) {
    return static_cast<int>(rng.below(d));
  }
  return greedy_value(q.slice(t + 1), problem.space, next_state).pair;
}

namespace {

class PlainSampler {
 public:
  explicit PlainSampler(const RngStreams& rng) : rng_(rng) {}

  double sample(const AdpProblem& problem, const AdpState& state, std::int64_t n, int t, int s,
                int a, int, const double* u_old) {
    RngStream q_stream = rng_.stream(n, t, Purpose::q_sample);
    const Noise w = problem.model->noise().sample(t, q_stream);
    const double fc = future_cost(*problem.model, problem.space, state.q.slice(t + 1), t, s, a, w);
    return problem.spec.combine(fc, u_old);
  }

  std::int64_t cap_hits() const { return 0; }

 private:
  const RngStreams& rng_;
};

}  // namespace

AdpState run(const AdpProblem& problem, AdpState state, std::int64_t iterations,
             const RngStreams& rng, const RunOptions& options) {
  PlainSampler sampler(rng);
  return detail::run_loop(problem, std::move(state), iterations, rng, options, sampler);
}

PolicyTable extract_policy(const ValueTable& q, const StateActionSpace& space) {
  PolicyTable policy(q.horizon(), space.num_states());
  for (int t = 0; t < q.horizon(); ++t) {
    for (int s = 0; s < space.num_states(); ++s) {
      policy.at(t, s) = greedy_value(q.slice(t), space, s).action;
    }
  }
  return policy;
}

double max_abs_error(const ValueTable& a, const ValueTable& b) {
  if (a.data().size() != b.data().size()) throw std::invalid_argument("table shapes differ");
  double e = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) e = std::max(e, std::abs(a.data()[i] - b.data()[i]));
  return e;
}

double squared_l2_error(const ValueTable& a, const ValueTable& b) {
  if (a.data().size() != b.data().size()) throw std::invalid_argument("table shapes differ");
  double e = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double diff = a.data()[i] - b.data()[i];
    e += diff * diff;
  }
  return e;
}

double max_abs(const ValueTable& a) {
  double e = 0.0;
  for (double v : a.data()) e = std::max(e, std::abs(v));
  return e;
}

}  // namespace dqbrm
