#pragma once

// Closed-form Q* for the testbed under mean-CVaR. Given W2, the future cost is
// uniform on [l_k, l_k + h], so its law is a finite mixture of uniforms whose
// cdf, quantile and expected excess are available exactly.

#include <algorithm>
#include <array>
#include <cmath>

#include "dqbrm/adp.hpp"
#include "dqbrm/models.hpp"

namespace oracle {

struct UniformMixture {
  std::array<double, 3> prob;
  std::array<double, 3> lo;
  double width;

  double cdf(double x) const {
    double f = 0.0;
    for (int k = 0; k < 3; ++k) f += prob[k] * std::clamp((x - lo[k]) / width, 0.0, 1.0);
    return f;
  }
  double mean() const {
    double m = 0.0;
    for (int k = 0; k < 3; ++k) m += prob[k] * (lo[k] + 0.5 * width);
    return m;
  }
  double quantile(double alpha) const {
    double a = *std::min_element(lo.begin(), lo.end());
    double b = *std::max_element(lo.begin(), lo.end()) + width;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (a + b);
      if (cdf(mid) >= alpha) b = mid; else a = mid;
    }
    return b;
  }
  double excess(double q) const {
    double e = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double l = lo[k], h = width;
      double part;
      if (q <= l) part = l + 0.5 * h - q;
      else if (q >= l + h) part = 0.0;
      else part = (l + h - q) * (l + h - q) / (2.0 * h);
      e += prob[k] * part;
    }
    return e;
  }
};

inline UniformMixture future_cost_law(const dqbrm::models::TestbedParams& p, int t, int s, int a,
                                      const std::array<double, 3>& v_next) {
  UniformMixture m;
  m.prob = {p.lo[s][a], p.hi[s][a] - p.lo[s][a], 1.0 - p.hi[s][a]};
  for (int k = 0; k < 3; ++k) m.lo[k] = p.base_cost(t, s, a) + v_next[k];
  m.width = p.scale[s][a];
  return m;
}

// Exact Q* (internal units) of the testbed for (1 - lambda) mean + lambda CVaR_alpha.
inline dqbrm::ValueTable testbed_q_star(double lambda, double alpha,
                                        const dqbrm::models::TestbedParams& p = {}) {
  const int T = p.horizon;
  dqbrm::ValueTable q(T, 6);
  std::array<double, 3> v{0.0, 0.0, 0.0};
  for (int t = T - 1; t >= 0; --t) {
    std::array<double, 3> v_t{};
    for (int s = 0; s < 3; ++s) {
      double best = 1e300;
      for (int a = 0; a < 2; ++a) {
        const auto law = future_cost_law(p, t, s, a, v);
        const double var = law.quantile(alpha);
        const double cvar = var + law.excess(var) / (1.0 - alpha);
        const double value = (1.0 - lambda) * law.mean() + lambda * cvar;
        q.at(t, 2 * s + a) = value;
        best = std::min(best, value);
      }
      v_t[s] = best;
    }
    v = v_t;
  }
  return q;
}

}  // namespace oracle
