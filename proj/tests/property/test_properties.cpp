// Randomized property checks. Each TEST draws its cases from a fixed master
// seed so failures reproduce; kCases is the minimum number of random instances.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "../support/testbed_oracle.hpp"
#include "dqbrm/adp.hpp"
#include "dqbrm/energy.hpp"
#include "dqbrm/errors.hpp"
#include "dqbrm/models.hpp"
#include "dqbrm/rds.hpp"
#include "dqbrm/saa.hpp"

using namespace dqbrm;

namespace {

constexpr int kCases = 200;

template <class F>
void for_cases(int count, std::uint64_t seed, F&& body) {
  for (int i = 0; i < count; ++i) {
    SCOPED_TRACE("case " + std::to_string(i));
    std::mt19937_64 gen(seed * 1000003ULL + i);
    body(gen);
    if (::testing::Test::HasFatalFailure()) return;
  }
}

double unif(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}
int pick(std::mt19937_64& g, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); }

WeightedSample random_sample(std::mt19937_64& g, int max_size = 200) {
  const int n = pick(g, 1, max_size);
  std::vector<double> v(n), w(n);
  const bool ties = pick(g, 0, 3) == 0;
  for (int i = 0; i < n; ++i) {
    v[i] = ties ? double(pick(g, -3, 3)) : unif(g, -10, 10);
    w[i] = unif(g, 0.01, 1.0);
  }
  return WeightedSample(v, w);
}

double random_alpha(std::mt19937_64& g) { return unif(g, 0.01, 0.99); }

std::vector<QbrmSpec> builtin_specs(double alpha, double lambda) {
  return {QbrmSpec::var(alpha), QbrmSpec::cvar(alpha), QbrmSpec::mean_cvar(lambda, alpha)};
}

QbrmSpec random_spec(std::mt19937_64& g) {
  switch (pick(g, 0, 3)) {
    case 0: return QbrmSpec::var(random_alpha(g));
    case 1: return QbrmSpec::cvar(random_alpha(g));
    case 2: return QbrmSpec::mean_cvar(unif(g, 0, 1), random_alpha(g));
    default: {
      const double a1 = unif(g, 0.05, 0.5), a2 = unif(g, 0.55, 0.98);
      std::vector<double> w{unif(g, 0, 1), unif(g, 0, 1), unif(g, 0, 1), unif(g, 0, 1), unif(g, 0, 1)};
      const double s = std::accumulate(w.begin(), w.end(), 0.0);
      for (auto& x : w) x /= s;
      return QbrmSpec(RiskLevels({a1, a2}), AffineMixCombiner{w[0], {w[1], w[2]}, {w[3], w[4]}});
    }
  }
}

// Plain re-derivations used as oracles.
double oracle_quantile(const WeightedSample& s, double alpha) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.values()[a] < s.values()[b]; });
  double acc = 0.0;
  for (auto i : idx) {
    acc += s.weights()[i];
    if (acc >= alpha - 1e-12) return s.values()[i];
  }
  return s.values()[idx.back()];
}

double rockafellar(const WeightedSample& s, double alpha, double u) {
  double e = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) e += s.weights()[i] * std::max(s.values()[i] - u, 0.0);
  return u + e / (1.0 - alpha);
}

double grid_cvar(const WeightedSample& s, double alpha) {
  const auto [lo, hi] = std::minmax_element(s.values().begin(), s.values().end());
  const double range = std::max(*hi - *lo, 1e-9);
  const double step = 1e-4 * range;
  double best = 1e300;
  for (double u = *lo; u <= *hi + step; u += step) best = std::min(best, rockafellar(s, alpha, u));
  // The objective is piecewise linear with kinks at sample points.
  for (double x : s.values()) best = std::min(best, rockafellar(s, alpha, x));
  return best;
}

AdpProblem testbed_problem(const QbrmSpec& spec, double bound_scale = 1.0, double gamma = 24,
                           double eta = 24) {
  models::TestbedParams p;
  auto model = models::testbed(p);
  return AdpProblem(model, spec,
                    ProjectionBoxes::from_stage_cost_bound(3, 6, spec, bound_scale * p.stage_cost_bound()),
                    StepsizeSchedule::constant(3, gamma, eta, 600, 0), SamplingPolicyConfig{1.0 / 6});
}

AdpState random_state_in_boxes(const AdpProblem& problem, std::mt19937_64& g) {
  AdpState st = initial_state(problem);
  const int T = problem.horizon(), d = problem.pairs();
  for (int t = 0; t < T; ++t) {
    for (int p = 0; p < d; ++p) {
      const std::size_t b = std::size_t(t) * d + p;
      st.q.at(t, p) = unif(g, problem.boxes.q_lo[b], problem.boxes.q_hi[b]);
      for (int i = 0; i < st.u.levels(); ++i) st.u.at(i, t, p) = unif(g, problem.boxes.u_lo[b], problem.boxes.u_hi[b]);
    }
  }
  st.iteration = pick(g, 0, 1000);
  return st;
}

// Random small model: S states, A actions, random feasible sets, 1-D uniform noise.
std::shared_ptr<FunctionalMdp> random_model(std::mt19937_64& g, Sense sense = Sense::minimize,
                                            double sign = 1.0) {
  const int T = pick(g, 1, 3), S = pick(g, 1, 4), A = pick(g, 1, 3);
  std::vector<std::vector<int>> feasible(S);
  for (auto& f : feasible) {
    for (int a = 0; a < A; ++a) if (pick(g, 0, 1)) f.push_back(a);
    if (f.empty()) f.push_back(pick(g, 0, A - 1));
  }
  std::vector<double> base(std::size_t(S) * A), slope(std::size_t(S) * A);
  for (auto& b : base) b = unif(g, -2, 2);
  for (auto& b : slope) b = unif(g, -3, 3);
  auto noise = std::make_shared<UniformBoxNoise>(std::vector<double>{0.0}, std::vector<double>{1.0});
  return std::make_shared<FunctionalMdp>(
      "random", T, S, A, feasible,
      [S](int t, int s, int a, const Noise& w) { return std::min(S - 1, int(w[0] * S + s + a + t) % S); },
      [=](int t, int s, int a, const Noise& w) {
        return sign * (base[s * A + a] * (1 + 0.3 * t) + slope[s * A + a] * w[0]);
      },
      noise, sense);
}

double normal_pdf(double x, double m, double sd) {
  return std::exp(-0.5 * (x - m) * (x - m) / (sd * sd)) / (sd * std::sqrt(2 * M_PI));
}

std::shared_ptr<BasisSet> gaussians_1d(const std::vector<double>& means, double sd, double lo, double hi) {
  std::vector<std::shared_ptr<const BasisComponent>> c;
  for (double m : means) c.push_back(std::make_shared<GaussianComponent>(std::vector<double>{m}, std::vector<double>{sd}));
  return std::make_shared<BasisSet>(std::move(c), ReferenceBox{{lo}, {hi}});
}

}  // namespace

// ---------------------------------------------------------------- risk measures

TEST(RiskProperty, RiskLevelsValidated) {
  for_cases(kCases, 1, [](auto& g) {
    const double a = unif(g, -0.5, 1.5), b = unif(g, -0.5, 1.5);
    const bool ok = a > 0 && a < 1 && b > 0 && b < 1 && a < b;
    if (ok) EXPECT_NO_THROW(RiskLevels({a, b}));
    else EXPECT_ANY_THROW(RiskLevels({a, b}));
  });
  EXPECT_ANY_THROW(RiskLevels({}));
}

TEST(RiskProperty, CombinerVanishesAtZeroAndRespectsLipschitz) {
  for_cases(kCases, 2, [](auto& g) {
    const auto spec = random_spec(g);
    const std::size_t m = spec.num_levels();
    std::vector<double> zero(m, 0.0);
    EXPECT_EQ(phi(0.0, zero, spec), 0.0);
    for (int probe = 0; probe < 20; ++probe) {
      std::vector<double> v(m), w(m);
      const double x = unif(g, -5, 5), y = unif(g, -5, 5);
      for (std::size_t i = 0; i < m; ++i) v[i] = unif(g, -5, 5), w[i] = unif(g, -5, 5);
      double dist = std::abs(x - y);
      for (std::size_t i = 0; i < m; ++i) dist += std::abs(v[i] - w[i]);
      EXPECT_LE(std::abs(phi(x, v, spec) - phi(y, w, spec)), spec.lipschitz_phi() * dist * (1 + 1e-12) + 1e-12);
    }
  });
  EXPECT_ANY_THROW(QbrmSpec::mean_cvar(1.5, 0.5));
  EXPECT_ANY_THROW(QbrmSpec::mean_cvar(-0.1, 0.5));
}

TEST(RiskProperty, WeightsNormalized) {
  for_cases(kCases, 3, [](auto& g) {
    const auto s = random_sample(g);
    double total = 0.0;
    for (double w : s.weights()) total += w;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_EQ(s.values().size(), s.weights().size());
  });
  EXPECT_ANY_THROW(WeightedSample({1.0, 2.0}, {1.0}));
}

TEST(RiskProperty, Monotonicity) {
  for_cases(kCases, 4, [](auto& g) {
    const auto x = random_sample(g);
    std::vector<double> y(x.values().begin(), x.values().end());
    for (auto& v : y) v += pick(g, 0, 2) ? unif(g, 0, 3) : 0.0;
    const WeightedSample ys(y, std::vector<double>(x.weights().begin(), x.weights().end()));
    for (const auto& spec : builtin_specs(random_alpha(g), unif(g, 0, 1))) {
      EXPECT_LE(empirical_qbrm(x, spec), empirical_qbrm(ys, spec) + 1e-10) << spec.name();
    }
  });
}

TEST(RiskProperty, TranslationAndHomogeneity) {
  for_cases(kCases, 5, [](auto& g) {
    const auto x = random_sample(g);
    const double c = unif(g, -20, 20), lam = unif(g, 0.01, 50);
    std::vector<double> shifted(x.values().begin(), x.values().end()), scaled = shifted;
    for (auto& v : shifted) v += c;
    for (auto& v : scaled) v *= lam;
    const std::vector<double> w(x.weights().begin(), x.weights().end());
    for (const auto& spec : builtin_specs(random_alpha(g), unif(g, 0, 1))) {
      const double base = empirical_qbrm(x, spec);
      EXPECT_NEAR(empirical_qbrm(WeightedSample(shifted, w), spec), base + c, 1e-10 * (1 + std::abs(c) + std::abs(base))) << spec.name();
      EXPECT_NEAR(empirical_qbrm(WeightedSample(scaled, w), spec), lam * base, 1e-10 * (1 + std::abs(lam * base))) << spec.name();
    }
  });
}

TEST(RiskProperty, Ordering) {
  for_cases(kCases, 6, [](auto& g) {
    const auto x = random_sample(g);
    const double a = random_alpha(g);
    const double cv = empirical_cvar(x, a);
    EXPECT_LE(empirical_quantile(x, a), cv + 1e-10);
    EXPECT_LE(empirical_mean(x), cv + 1e-10);
  });
}

TEST(RiskProperty, QuantileAndCvarMatchOracles) {
  for_cases(kCases, 7, [](auto& g) {
    const auto x = random_sample(g, 60);
    const double a = random_alpha(g);
    EXPECT_EQ(empirical_quantile(x, a), oracle_quantile(x, a));
    EXPECT_NEAR(empirical_cvar(x, a), grid_cvar(x, a), 1e-6);
  });
}

// ---------------------------------------------------------------- mdp core

TEST(MdpProperty, SpaceEnumerationRoundTrips) {
  for_cases(kCases, 10, [](auto& g) {
    auto model = random_model(g);
    StateActionSpace space(*model);
    int total = 0;
    for (int s = 0; s < model->num_states(); ++s) total += int(model->feasible_actions(s).size());
    EXPECT_EQ(space.size(), total);
    for (int p = 0; p < space.size(); ++p) {
      const auto [s, a] = space.pair(p);
      EXPECT_EQ(space.index(s, a), p);
      EXPECT_GE(p, space.begin(s));
      EXPECT_LT(p, space.end(s));
    }
  });
}

TEST(MdpProperty, TransitionsStayInStateSpaceAndDensityNonnegative) {
  for_cases(kCases, 11, [](auto& g) {
    auto model = random_model(g);
    RngStream rng(g());
    for (int k = 0; k < 50; ++k) {
      const int t = pick(g, 0, model->horizon() - 1), s = pick(g, 0, model->num_states() - 1);
      const auto acts = model->feasible_actions(s);
      const int a = acts[pick(g, 0, int(acts.size()) - 1)];
      const Noise w = model->noise().sample(t, rng);
      const auto r = step(*model, t, s, a, w);
      EXPECT_GE(r.next_state, 0);
      EXPECT_LT(r.next_state, model->num_states());
      EXPECT_GE(model->noise().pdf(t, w), 0.0);
    }
  });
}

TEST(MdpProperty, GreedyMinStability) {
  for_cases(kCases, 12, [](auto& g) {
    auto model = random_model(g);
    StateActionSpace space(*model);
    std::vector<double> v(space.size()), w(space.size());
    double dist = 0.0;
    for (int p = 0; p < space.size(); ++p) {
      v[p] = unif(g, -10, 10);
      w[p] = v[p] + unif(g, -2, 2);
      dist = std::max(dist, std::abs(v[p] - w[p]));
    }
    for (int s = 0; s < space.num_states(); ++s) {
      EXPECT_LE(std::abs(greedy_value(v, space, s).value - greedy_value(w, space, s).value), dist + 1e-15);
    }
  });
}

TEST(MdpProperty, GreedyArgminTranslationInvariant) {
  for_cases(kCases, 13, [](auto& g) {
    auto model = random_model(g);
    StateActionSpace space(*model);
    std::vector<double> v(space.size());
    for (auto& x : v) x = double(pick(g, -3, 3));  // integer values exercise ties
    const double c = double(pick(g, -100, 100));
    auto shifted = v;
    for (auto& x : shifted) x += c;
    for (int s = 0; s < space.num_states(); ++s) {
      EXPECT_EQ(greedy_value(v, space, s).action, greedy_value(shifted, space, s).action);
    }
  });
}

TEST(MdpProperty, RngDeterminismAndIndependence) {
  for_cases(kCases, 14, [](auto& g) {
    const std::uint64_t seed = g(), n = g() % 1000000, t = g() % 64;
    const auto purpose = static_cast<Purpose>(1 + g() % 6);
    auto a = RngStreams(seed).stream(n, t, purpose);
    auto b = RngStreams(seed).stream(n, t, purpose);
    auto c = RngStreams(seed).stream(n + 1, t, purpose);
    int same = 0;
    double sab = 0, sa = 0, sc = 0, saa = 0, scc = 0;
    const int k = 2000;
    for (int i = 0; i < k; ++i) {
      const double x = a.uniform(), y = b.uniform(), z = c.uniform();
      ASSERT_EQ(x, y);
      same += x == z;
      sa += x, sc += z, sab += x * z, saa += x * x, scc += z * z;
    }
    EXPECT_EQ(same, 0);
    const double cov = sab / k - (sa / k) * (sc / k);
    const double corr = cov / std::sqrt((saa / k - sa * sa / k / k) * (scc / k - sc * sc / k / k));
    EXPECT_LT(std::abs(corr), 5.0 / std::sqrt(double(k)));
  });
}

TEST(MdpProperty, SenseSymmetryEndToEnd) {
  for_cases(kCases, 15, [](auto& g) {
    const std::uint64_t model_seed = g();
    std::mt19937_64 g1(model_seed), g2(model_seed);
    auto maxi = random_model(g1, Sense::maximize, 1.0);
    auto mini = random_model(g2, Sense::minimize, -1.0);
    const auto spec = random_spec(g);
    const auto scen = ScenarioSet::sample(maxi->noise(), maxi->horizon(), 30, RngStreams(g()));
    const auto a = saa_optimal(*maxi, spec, scen);
    const auto b = saa_optimal(*mini, spec, scen);
    EXPECT_EQ(a.policy, b.policy);
    for (int t = 0; t <= maxi->horizon(); ++t) {
      for (int s = 0; s < maxi->num_states(); ++s) EXPECT_EQ(a.value.at(t, s), -b.value.at(t, s));
    }
    StateActionSpace space(*maxi);
    auto boxes = ProjectionBoxes::from_stage_cost_bound(maxi->horizon(), space.size(), spec, 10.0);
    const auto steps = StepsizeSchedule::constant(maxi->horizon(), 1, 1);
    AdpProblem pa(maxi, spec, boxes, steps, {0.1 / space.size()});
    AdpProblem pb(mini, spec, boxes, steps, {0.1 / space.size()});
    const RngStreams rng(g());
    EXPECT_EQ(run(pa, initial_state(pa), 200, rng).q, run(pb, initial_state(pb), 200, rng).q);
  });
}

// ---------------------------------------------------------------- ADP solver

TEST(AdpProperty, PsiIsTwoValued) {
  auto problem = testbed_problem(QbrmSpec::mean_cvar(0.5, 0.9));
  for_cases(kCases, 20, [&](auto& g) {
    const double alpha = random_alpha(g);
    std::vector<double> q_next(6);
    for (auto& x : q_next) x = unif(g, 0, 20);
    const int t = pick(g, 0, 2), s = pick(g, 0, 2), a = pick(g, 0, 1);
    const double psi = psi_gradient(problem, unif(g, 0, 30), q_next, t, s, a, Noise{unif(g, 0, 1), unif(g, 0, 1)}, alpha);
    EXPECT_TRUE(psi == 1.0 || psi == 1.0 - 1.0 / (1.0 - alpha)) << psi;
  });
}

TEST(AdpProperty, BoxesWellFormed) {
  for_cases(kCases, 21, [](auto& g) {
    const auto spec = random_spec(g);
    const int T = pick(g, 1, 6), d = pick(g, 1, 30);
    const auto b = ProjectionBoxes::from_stage_cost_bound(T, d, spec, unif(g, 0.1, 100));
    for (std::size_t i = 0; i < b.u_lo.size(); ++i) {
      EXPECT_LE(b.u_lo[i], b.u_hi[i]);
      EXPECT_TRUE(std::isfinite(b.u_lo[i]) && std::isfinite(b.u_hi[i]));
    }
    for (std::size_t i = 0; i < b.q_lo.size(); ++i) EXPECT_LE(b.q_lo[i], b.q_hi[i]);
    for (int p = 0; p < d; ++p) {
      EXPECT_EQ(b.q_lo[std::size_t(T) * d + p], 0.0);
      EXPECT_EQ(b.q_hi[std::size_t(T) * d + p], 0.0);
    }
  });
}

TEST(AdpProperty, EveryIterateStaysInBoxes) {
  for_cases(kCases, 22, [](auto& g) {
    // Tight boxes and large steps so the projection is active.
    auto problem = testbed_problem(random_spec(g), unif(g, 0.05, 1.0), unif(g, 100, 5000), unif(g, 10, 600));
    AdpState start = random_state_in_boxes(problem, g);
    RunOptions opt;
    for (int n = 1; n <= 40; ++n) opt.checkpoints.push_back(start.iteration + n);
    opt.on_checkpoint = [&](std::int64_t, const AdpState& s) {
      EXPECT_TRUE(problem.boxes.contains(s.q));
      EXPECT_TRUE(problem.boxes.contains(s.u));
      for (int p = 0; p < problem.pairs(); ++p) EXPECT_EQ(s.q.at(problem.horizon(), p), 0.0);
    };
    run(problem, start, 40, RngStreams(g()), opt);
  });
}

TEST(AdpProperty, UnvisitedEntriesUnchanged) {
  for_cases(kCases, 23, [](auto& g) {
    auto problem = testbed_problem(random_spec(g));
    const AdpState before = random_state_in_boxes(problem, g);
    const AdpState after = run(problem, before, 1, RngStreams(g()));
    for (int t = 0; t < problem.horizon(); ++t) {
      int changed_pair = -1;
      for (int p = 0; p < problem.pairs(); ++p) {
        bool changed = after.q.at(t, p) != before.q.at(t, p);
        for (int i = 0; i < before.u.levels(); ++i) changed |= after.u.at(i, t, p) != before.u.at(i, t, p);
        if (!changed) continue;
        EXPECT_EQ(changed_pair, -1) << "two pairs changed at t=" << t;
        changed_pair = p;
      }
    }
  });
}

TEST(AdpProperty, StepsizesPositive) {
  for_cases(kCases, 24, [](auto& g) {
    const int T = pick(g, 1, 5);
    const auto s = StepsizeSchedule::constant(T, unif(g, 0.1, 100), unif(g, 0.1, 100), unif(g, 0, 1000), unif(g, 0, 1000));
    const std::int64_t n = pick(g, 1, 1000000);
    for (int t = 0; t < T; ++t) {
      EXPECT_GT(s.gamma_step(t, n), 0.0);
      EXPECT_GT(s.eta_step(t, n), 0.0);
      EXPECT_LE(s.eta_step(t, n), 1.0);
    }
  });
  EXPECT_ANY_THROW(StepsizeSchedule::constant(2, -1, 1).validate(2));
}

TEST(AdpProperty, ExplorationVisitsEveryPair) {
  auto problem = testbed_problem(QbrmSpec::mean_cvar(0.5, 0.9));
  const double eps = problem.sampling.epsilon;
  for_cases(kCases, 25, [&](auto& g) {
    ValueTable q(3, 6);
    for (auto& x : q.data()) x = unif(g, -5, 5);
    const int t = pick(g, 0, 1), s = pick(g, 0, 2), a = pick(g, 0, 1);
    RngStream rng(g());
    const int draws = 3000;
    std::vector<int> hits(6, 0);
    for (int k = 0; k < draws; ++k) {
      const Noise w{rng.uniform(), rng.uniform()};
      ++hits[epsilon_greedy_next(problem, q, t, s, a, w, rng)];
    }
    const double floor = eps - 5.0 * std::sqrt(eps * (1 - eps) / draws);
    for (int p = 0; p < 6; ++p) EXPECT_GE(hits[p] / double(draws), floor) << "pair " << p;
  });
}

TEST(AdpProperty, MeanSquaredErrorDecreasesOverThirtySeeds) {
  const auto q_star = oracle::testbed_q_star(0.5, 0.9);
  auto problem = testbed_problem(QbrmSpec::mean_cvar(0.5, 0.9));
  double early = 0.0, late = 0.0;
  for (std::uint64_t seed = 101; seed <= 130; ++seed) {
    RunOptions opt;
    opt.checkpoints = {1000, 100000};
    opt.on_checkpoint = [&](std::int64_t n, const AdpState& s) { (n == 1000 ? early : late) += squared_l2_error(s.q, q_star); };
    run(problem, initial_state(problem), 100000, RngStreams(seed), opt);
  }
  EXPECT_LT(late, early);
}

TEST(AdpProperty, AuxIteratesTrackFrozenQuantiles) {
  // At t = T-1 the continuation Q_T = 0 is frozen by construction.
  models::TestbedParams p;
  auto model = models::testbed(p);
  StateActionSpace space(*model);
  RngStream rng(4242);
  for (double alpha : {0.3, 0.6, 0.9}) {
    auto problem = testbed_problem(QbrmSpec::cvar(alpha));
    AdpState st = run(problem, initial_state(problem), 200000, RngStreams(9));
    for (int pair = 0; pair < 6; ++pair) {
      const auto [s, a] = space.pair(pair);
      std::vector<double> costs(1000000);
      for (auto& c : costs) c = model->cost(2, s, a, model->noise().sample(2, rng));
      const auto k = static_cast<std::size_t>(std::ceil(alpha * costs.size())) - 1;
      std::nth_element(costs.begin(), costs.begin() + k, costs.end());
      EXPECT_NEAR(st.u.at(0, 2, pair), costs[k], 0.02 * std::abs(costs[k])) << "alpha " << alpha << " pair " << pair;
    }
  }
}

// ---------------------------------------------------------------- RDS

TEST(RdsProperty, CoefficientsStayNonnegative) {
  auto model = models::rds_1d();
  auto basis = models::rds_1d_basis(*model);
  for_cases(kCases, 30, [&](auto& g) {
    std::vector<double> theta(4);
    for (auto& x : theta) x = pick(g, 0, 2) ? unif(g, 0, 2) : 0.0;
    RngStream rng(g());
    for (int k = 0; k < 50; ++k) {
      const Noise w = sample_mixture(theta, *basis, 0, rng);
      update_coefficients(theta, *basis, 0, w, unif(g, 0, 5), model->noise().pdf(0, w), unif(g, 0, 1e3));
      for (double x : theta) ASSERT_GE(x, 0.0);
    }
  });
}

TEST(RdsProperty, ImportanceCorrectedBellmanSampleUnbiased) {
  // Frozen testbed tables; the mixture lives on the noise square.
  models::TestbedParams tp;
  auto model = models::testbed(tp);
  const auto spec = QbrmSpec::mean_cvar(0.5, 0.9);
  auto problem = testbed_problem(spec);
  const auto q_star = oracle::testbed_q_star(0.5, 0.9);
  auto basis = models::generic_basis(*model);
  for_cases(20, 31, [&](auto& g) {
    std::vector<double> theta(basis->size());
    for (auto& x : theta) x = unif(g, 0, 1);
    const int t = pick(g, 0, 2), pair = pick(g, 0, 5);
    const auto [s, a] = problem.space.pair(pair);
    const std::vector<double> u{unif(g, 2, 12)};
    RngStream rng(g());
    const int n = 100000;
    double s1 = 0, s1q = 0, s2 = 0, s2q = 0;
    for (int i = 0; i < n; ++i) {
      const Noise w = sample_mixture(theta, *basis, t, rng);
      const double lr = likelihood_ratio(w, theta, *basis, t, model->noise().pdf(t, w), 1e300).value;
      const double h1 = lr * bellman_sample(problem, u, q_star.slice(t + 1), t, s, a, w);
      const Noise v = model->noise().sample(t, rng);
      const double h2 = bellman_sample(problem, u, q_star.slice(t + 1), t, s, a, v);
      s1 += h1, s1q += h1 * h1, s2 += h2, s2q += h2 * h2;
    }
    const double m1 = s1 / n, m2 = s2 / n;
    const double se = std::sqrt((s1q / n - m1 * m1) / n + (s2q / n - m2 * m2) / n);
    EXPECT_LT(std::abs(m1 - m2), 3 * se) << "t=" << t << " pair=" << pair;
  });
}

TEST(RdsProperty, ZeroRowFallsBackToEqualWeights) {
  for_cases(kCases, 32, [](auto& g) {
    const int K = pick(g, 1, 6);
    std::vector<double> zero(K, 0.0);
    RngStream rng(g());
    const int draws = 4000;
    std::vector<int> hits(K, 0);
    for (int i = 0; i < draws; ++i) ++hits[sample_component(zero, rng)];
    const double p = 1.0 / K;
    for (int k = 0; k < K; ++k) EXPECT_NEAR(hits[k] / double(draws), p, 5 * std::sqrt(p * (1 - p) / draws));
  });
}

TEST(RdsProperty, ProjectionSatisfiesKkt) {
  for_cases(kCases, 33, [](auto& g) {
    const int K = pick(g, 2, 4);
    std::vector<double> means(K);
    for (int k = 0; k < K; ++k) means[k] = -3 + 6.0 * k / (K - 1) + unif(g, -0.3, 0.3);
    auto basis = gaussians_1d(means, unif(g, 0.7, 1.5), -5, 5);
    const int pts[] = {400};
    auto grid = QuadratureGrid::midpoint(basis->reference_box(), pts);
    const double c1 = unif(g, 0, 2), c2 = unif(g, -1, 1), m = unif(g, -3, 3), w = unif(g, 0.3, 2);
    auto target = [&](const Noise& x) { return std::max(0.0, c1 * normal_pdf(x[0], m, w) + c2 * 0.1 * std::sin(2 * x[0])); };
    const auto theta = project_phi(target, *basis, 0, grid);
    const Eigen::MatrixXd G = gram_matrix(*basis, 0, grid);
    EXPECT_TRUE(G.isApprox(G.transpose(), 0.0));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
    std::vector<double> phi(K);
    for (const auto& node : grid.nodes) {
      basis->evaluate(0, node, phi);
      for (int k = 0; k < K; ++k) b[k] += target(node) * phi[k];
    }
    b /= double(grid.nodes.size());
    Eigen::VectorXd th(K);
    for (int k = 0; k < K; ++k) th[k] = theta[k];
    const Eigen::VectorXd grad = G * th - b;
    for (int k = 0; k < K; ++k) {
      ASSERT_GE(theta[k], 0.0);
      if (theta[k] > 0) EXPECT_NEAR(grad[k], 0.0, 1e-8) << "k=" << k;
      else EXPECT_GE(grad[k], -1e-8) << "k=" << k;
    }
  });
}

TEST(RdsProperty, MixtureScaleInvariantAndNonnegative) {
  auto model = models::rds_1d();
  auto basis = models::rds_1d_basis(*model);
  for_cases(kCases, 34, [&](auto& g) {
    std::vector<double> theta(4), scaled(4);
    for (auto& x : theta) x = unif(g, 0, 3);
    const double c = unif(g, 1e-3, 1e3);
    for (int k = 0; k < 4; ++k) scaled[k] = c * theta[k];
    const Noise w{unif(g, -6, 6)};
    const double p = mixture_pdf(theta, *basis, 0, w);
    EXPECT_GE(p, 0.0);
    EXPECT_NEAR(mixture_pdf(scaled, *basis, 0, w), p, 1e-12 * std::max(1.0, p));
    std::vector<double> phi(4);
    basis->evaluate(0, w, phi);
    for (double x : phi) EXPECT_GE(x, 0.0);
  });
}

TEST(RdsProperty, ReferenceDensityIntegratesToOne) {
  for_cases(kCases, 35, [](auto& g) {
    const int dim = pick(g, 1, 2);
    ReferenceBox box;
    for (int k = 0; k < dim; ++k) {
      const double lo = unif(g, -10, 5);
      box.lo.push_back(lo);
      box.hi.push_back(lo + unif(g, 0.1, 10));
    }
    std::vector<int> pts(dim, 40);
    const auto grid = QuadratureGrid::midpoint(box, pts);
    double integral = 0.0;
    for (const auto& w : grid.nodes) integral += box.density(w);
    EXPECT_NEAR(integral * box.volume() / grid.nodes.size(), 1.0, 1e-12);
  });
}

// ---------------------------------------------------------------- SAA

TEST(SaaProperty, OptimalDominatesEveryProbedPolicy) {
  for_cases(kCases, 40, [](auto& g) {
    auto model = random_model(g, pick(g, 0, 1) ? Sense::maximize : Sense::minimize);
    const auto spec = random_spec(g);
    const auto scen = ScenarioSet::sample(model->noise(), model->horizon(), pick(g, 1, 40), RngStreams(g()));
    const auto opt = saa_optimal(*model, spec, scen);
    for (int t = 0; t <= model->horizon(); ++t) {
      for (int s = 0; s < model->num_states(); ++s) {
        if (t == model->horizon()) EXPECT_EQ(opt.value.at(t, s), 0.0);
      }
    }
    for (int probe = 0; probe < 5; ++probe) {
      PolicyTable pol(model->horizon(), model->num_states());
      for (int t = 0; t < model->horizon(); ++t) {
        for (int s = 0; s < model->num_states(); ++s) {
          const auto acts = model->feasible_actions(s);
          pol.at(t, s) = acts[pick(g, 0, int(acts.size()) - 1)];
        }
      }
      EXPECT_NO_THROW(validate_policy(*model, pol));
      const auto v = evaluate_policy(*model, spec, pol, scen);
      for (int s = 0; s < model->num_states(); ++s) {
        if (model->sense() == Sense::maximize) EXPECT_GE(opt.value.at(0, s), v.at(0, s) - 1e-10);
        else EXPECT_LE(opt.value.at(0, s), v.at(0, s) + 1e-10);
      }
    }
  });
}

TEST(SaaProperty, RiskNeutralEqualsNestedExpectation) {
  for_cases(kCases, 41, [](auto& g) {
    auto model = random_model(g);
    const auto scen = ScenarioSet::sample(model->noise(), model->horizon(), pick(g, 1, 30), RngStreams(g()));
    PolicyTable pol(model->horizon(), model->num_states());
    for (int t = 0; t < model->horizon(); ++t) {
      for (int s = 0; s < model->num_states(); ++s) {
        const auto acts = model->feasible_actions(s);
        pol.at(t, s) = acts[pick(g, 0, int(acts.size()) - 1)];
      }
    }
    const auto v = evaluate_policy(*model, QbrmSpec::mean_cvar(0.0, 0.9), pol, scen);
    std::vector<double> next(model->num_states(), 0.0);
    for (int t = model->horizon() - 1; t >= 0; --t) {
      std::vector<double> cur(model->num_states());
      for (int s = 0; s < model->num_states(); ++s) {
        double sum = 0.0;
        for (const auto& w : scen.at(t)) {
          const int a = pol.at(t, s);
          sum += model->cost(t, s, a, w) + next[model->transition(t, s, a, w)];
        }
        cur[s] = sum / scen.count(t);
      }
      next = cur;
    }
    for (int s = 0; s < model->num_states(); ++s) EXPECT_NEAR(v.at(0, s), next[s], 1e-10 * (1 + std::abs(next[s])));
  });
}

TEST(SaaProperty, ConvergedAdpPolicyScoresBetweenMyopicAndOptimal) {
  models::TestbedParams p;
  auto model = models::testbed(p);
  const auto spec = QbrmSpec::mean_cvar(0.5, 0.9);
  auto problem = testbed_problem(spec);
  const auto scen = ScenarioSet::sample(model->noise(), 3, 5000, RngStreams(55));
  const auto opt = saa_optimal(*model, spec, scen);
  const auto myo = evaluate_policy(*model, spec, myopic_policy(*model, spec, scen), scen);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto st = run(problem, initial_state(problem), 200000, RngStreams(seed));
    const auto v = evaluate_policy(*model, spec, extract_policy(st.q, problem.space), scen);
    for (int s = 0; s < 3; ++s) {
      const double pct = percent_optimality(v.at(0, s), myo.at(0, s), opt.value.at(0, s));
      EXPECT_GE(pct, 0.0) << "seed " << seed << " s " << s;
      EXPECT_LE(pct, 1.0) << "seed " << seed << " s " << s;
    }
  }
}

TEST(SaaProperty, ScenarioSetsNonemptyAndPrefixConsistent) {
  auto model = models::testbed();
  for_cases(kCases, 42, [&](auto& g) {
    const int n = pick(g, 1, 50), m = pick(g, n, 100);
    const RngStreams rng(g());
    const auto a = ScenarioSet::sample(model->noise(), 3, n, rng);
    const auto b = ScenarioSet::sample(model->noise(), 3, m, rng);
    for (int t = 0; t < 3; ++t) {
      ASSERT_EQ(a.count(t), std::size_t(n));
      for (int i = 0; i < n; ++i) EXPECT_EQ(a.at(t)[i], b.at(t)[i]);
    }
  });
}

// ---------------------------------------------------------------- energy

TEST(EnergyProperty, PriceMomentsMatch) {
  energy::EnergyConfig c;
  energy::EnergyNoise noise(c);
  RngStream rng(2024);
  const int draws = 10000000;
  for (int t = 0; t < c.horizon; ++t) {
    double s = 0, sq = 0;
    for (int i = 0; i < draws / c.horizon; ++i) {
      const double p = noise.sample(t, rng)[0];
      ASSERT_GT(p, 0.0);
      s += p, sq += p * p;
    }
    const double k = draws / c.horizon, mean = s / k, var = sq / k - mean * mean;
    // The law at epoch t is the price at t + 1.
    EXPECT_NEAR(mean, c.price_mean(t + 1), 0.01 * c.price_mean(t + 1)) << "t=" << t;
    EXPECT_NEAR(var, c.price_var, 0.03 * c.price_var) << "t=" << t;
  }
}

TEST(EnergyProperty, PenaltyFrequenciesCalibrated) {
  energy::EnergyConfig c;
  const auto mu = energy::mu_s_from_probs(c.penalty_probs, c.sigma_u);
  energy::EnergyNoise noise(c);
  RngStream rng(99);
  const int draws = 10000000;
  std::vector<int> hits(mu.size(), 0);
  for (int i = 0; i < draws; ++i) {
    const double u = noise.sample(0, rng)[1];
    for (std::size_t s = 0; s < mu.size(); ++s) hits[s] += mu[s] + u < 0.0;
  }
  for (std::size_t s = 0; s < mu.size(); ++s) {
    const double p = c.penalty_probs[s];
    EXPECT_NEAR(hits[s] / double(draws), p, 3 * std::sqrt(p * (1 - p) / draws)) << "level " << s;
  }
}

TEST(EnergyProperty, ActionAndPairCounts) {
  energy::EnergyMdp model(energy::EnergyConfig{});
  EXPECT_EQ(model.num_actions(), 66);
  EXPECT_EQ(StateActionSpace(model).size(), 462);
  for (const auto& b : model.bids()) EXPECT_LE(b.buy, b.sell);
}

TEST(EnergyProperty, ArbitrageAccounting) {
  energy::EnergyConfig c;
  for_cases(kCases, 50, [&](auto& g) {
    int s = pick(g, 1, c.s_max);
    double total = 0.0, ledger = 0.0;
    for (int t = 0; t < 12; ++t) {
      const double buy = 50.0 * pick(g, 0, 10);
      const energy::Bids bids{buy, buy + 50.0 * pick(g, 0, 10 - int(buy / 50))};
      const double price = unif(g, 1, 600);
      total += energy::contribution(s, bids, price, energy::penalty(0.0, unif(g, -3, 3), 0.0, 0.0));
      const bool bought = bids.buy > price, sold = bids.sell < price;
      if (sold && s > 0) ledger += price;
      if (bought) ledger -= price;
      s = energy::storage_transition(s, bids, price, c.s_max);
    }
    EXPECT_NEAR(total, ledger, 1e-9);
  });
}

TEST(EnergyProperty, ConfigValidationAndProductDensity) {
  for_cases(kCases, 51, [](auto& g) {
    energy::EnergyConfig c;
    c.reward_rate = unif(g, -1, 10);
    c.penalty_rate = unif(g, -1, 10);
    c.penalty_probs.assign(7, 0.0);
    for (auto& p : c.penalty_probs) p = unif(g, -0.02, 0.2);
    if (pick(g, 0, 1)) std::sort(c.penalty_probs.rbegin(), c.penalty_probs.rend());
    bool ok = c.reward_rate > 0 && c.reward_rate < c.penalty_rate;
    for (std::size_t i = 1; i < c.penalty_probs.size(); ++i) ok &= c.penalty_probs[i] <= c.penalty_probs[i - 1];
    for (double p : c.penalty_probs) ok &= p > 0;
    if (ok) EXPECT_NO_THROW(c.validate());
    else EXPECT_THROW(c.validate(), ConfigError);
  });
  energy::EnergyConfig c;
  energy::EnergyNoise noise(c);
  for_cases(kCases, 52, [&](auto& g) {
    const int t = pick(g, 0, c.horizon - 1);
    const double price = unif(g, 1, 400), u = unif(g, -4, 4);
    const auto lp = noise.price_params(t);
    const double fp = std::exp(-0.5 * std::pow((std::log(price) - lp.mu) / lp.sigma, 2)) / (price * lp.sigma * std::sqrt(2 * M_PI));
    const double fu = normal_pdf(u, 0.0, c.sigma_u);
    EXPECT_NEAR(noise.pdf(t, Noise{price, u}), fp * fu, 1e-12 * fp * fu + 1e-300);
    EXPECT_EQ(noise.pdf(t, Noise{-price, u}), 0.0);
  });
}
