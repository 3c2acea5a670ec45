#pragma once

// Shared Dynamic-QBRM ADP iteration. The q-sampler policy decides how the
// value-update sample W^q is drawn and weighted; everything else (trajectory,
// quantile updates, random streams) is common to the plain and RDS variants.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dqbrm/adp.hpp"
#include "dqbrm/errors.hpp"

namespace dqbrm::detail {

inline std::int64_t resolve_trace_every(std::int64_t requested, std::int64_t iterations) {
  if (requested > 0) return requested;
  return std::max<std::int64_t>(1, (iterations + 999) / 1000);
}

inline void validate_run(const AdpProblem& problem, const AdpState& state, std::int64_t iterations) {
  if (iterations < 0) throw std::invalid_argument("run: iteration count must be nonnegative");
  if (state.q.horizon() != problem.horizon() || state.q.pairs() != problem.pairs() ||
      state.u.horizon() != problem.horizon() || state.u.pairs() != problem.pairs() ||
      state.u.levels() != static_cast<int>(problem.spec.num_levels())) {
    throw std::invalid_argument("run: table shapes do not match the problem");
  }
  if (!problem.boxes.contains(state.q) || !problem.boxes.contains(state.u)) {
    throw std::invalid_argument("run: initial tables must lie inside the projection boxes");
  }
}

template <class QSampler>
AdpState run_loop(const AdpProblem& problem, AdpState state, std::int64_t iterations,
                  const RngStreams& rng, const RunOptions& options, QSampler& sampler) {
  validate_run(problem, state, iterations);
  if (iterations == 0) return state;

  const MdpModel& model = *problem.model;
  const NoiseModel& noise = model.noise();
  const StateActionSpace& space = problem.space;
  const int T = problem.horizon();
  const int d = problem.pairs();
  const int m = static_cast<int>(problem.spec.num_levels());
  const auto alphas = problem.spec.levels().alphas();
  const double explore_prob = problem.sampling.epsilon * d;
  if (explore_prob > 1.0 + 1e-12) throw ConfigError("epsilon * d must not exceed 1");

  const std::int64_t first = state.iteration + 1;
  const std::int64_t last = state.iteration + iterations;
  const std::int64_t trace_every = resolve_trace_every(options.trace_every, iterations);
  auto checkpoint = options.checkpoints.begin();
  while (checkpoint != options.checkpoints.end() && *checkpoint < first) ++checkpoint;

  std::vector<double> u_old(m);
  for (std::int64_t n = first; n <= last; ++n) {
    RngStream init = rng.stream(n, 0, Purpose::init_state);
    int pair = static_cast<int>(init.below(d));
    const int first_pair = pair;

    for (int t = 0; t < T; ++t) {
      const int s = space.state_of(pair);
      const int a = space.action_of(pair);
      const double* q_next = state.q.slice(t + 1).data();

      RngStream u_stream = rng.stream(n, t, Purpose::u_sample);
      const Noise w_u = noise.sample(t, u_stream);
      const int next_state = model.transition(t, s, a, w_u);
      const double fc_u = model.internal_cost(t, s, a, w_u) + greedy_min(q_next, space, next_state);

      const double gamma = problem.steps.gamma_step(t, n);
      for (int i = 0; i < m; ++i) {
        double& u = state.u.at(i, t, pair);
        u_old[i] = u;
        const double psi = psi_gradient(u, fc_u, alphas[i]);
        const std::size_t box = std::size_t(t) * d + pair;
        u = aux_step(u, psi, gamma, problem.boxes.u_lo[box], problem.boxes.u_hi[box]);
      }

      const double q_hat = sampler.sample(problem, state, n, t, s, a, pair, u_old.data());

      {
        double& q = state.q.at(t, pair);
        const std::size_t box = std::size_t(t) * d + pair;
        q = value_step(q, q_hat, problem.steps.eta_step(t, n), problem.boxes.q_lo[box],
                       problem.boxes.q_hi[box]);
      }

      if (t + 1 < T) {
        RngStream explore = rng.stream(n, t, Purpose::explore);
        if (explore_prob > 0.0 && explore.uniform() < explore_prob) {
          pair = static_cast<int>(explore.below(d));
        } else {
          pair = greedy_value(state.q.slice(t + 1), space, next_state).pair;
        }
      }
    }
    state.iteration = n;

    const bool record = options.trace_sink &&
                        (n % trace_every == 0 || n == 1 || n == 10 || n == 100 || n == last);
    if (record) {
      TraceRecord rec;
      rec.n = n;
      rec.first_pair = first_pair;
      rec.lr_cap_hits = sampler.cap_hits();
      if (options.reference) {
        rec.err_inf = max_abs_error(state.q, *options.reference);
        rec.err_l2 = std::sqrt(squared_l2_error(state.q, *options.reference));
      }
      rec.watched_q.reserve(options.watched.size());
      rec.watched_u.assign(m, {});
      for (const auto& w : options.watched) {
        rec.watched_q.push_back(state.q.at(w.t, w.pair));
        for (int i = 0; i < m; ++i) {
          rec.watched_u[i].push_back(w.t < T ? state.u.at(i, w.t, w.pair) : 0.0);
        }
      }
      options.trace_sink(rec);
    }
    if (checkpoint != options.checkpoints.end() && *checkpoint == n) {
      if (options.on_checkpoint) options.on_checkpoint(n, state);
      ++checkpoint;
    }
  }
  return state;
}

}  // namespace dqbrm::detail
