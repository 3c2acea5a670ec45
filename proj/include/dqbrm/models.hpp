#pragma once

#include <array>
#include <memory>

#include "dqbrm/mdp.hpp"
#include "dqbrm/rds.hpp"

namespace dqbrm::models {

/// Three states, two actions, T = 3, W = (W1, W2) uniform on the unit square.
/// Cost base(s,a) (1 + t/4) + scale(s,a) W1; the successor is 0, 1 or 2 as W2
/// falls below lo(s,a), below hi(s,a), or above.
struct TestbedParams {
  std::array<std::array<double, 2>, 3> base{{{1.0, 2.0}, {2.0, 1.0}, {0.5, 1.5}}};
  std::array<std::array<double, 2>, 3> scale{{{4.0, 2.0}, {2.0, 4.0}, {3.0, 2.0}}};
  std::array<std::array<double, 2>, 3> lo{{{0.6, 0.2}, {0.3, 0.1}, {0.5, 0.25}}};
  std::array<std::array<double, 2>, 3> hi{{{0.9, 0.5}, {0.8, 0.3}, {0.7, 0.75}}};
  int horizon = 3;

  double base_cost(int t, int s, int a) const { return base[s][a] * (1.0 + 0.25 * t); }
  double stage_cost_bound() const;
};

std::shared_ptr<const MdpModel> testbed(const TestbedParams& params = {});

/// Four states in a line, actions stay (0) and advance (1), T = 4, W uniform on [0, 1].
/// Advancing succeeds when W < 0.8; cost (3 - s) + a (0.5 + W).
std::shared_ptr<const MdpModel> toy_chain();

/// One state, one action, T = 1, W ~ N(0, 1), cost W.
std::shared_ptr<const MdpModel> rds_1d();

// K = 4 unit-variance normals centred at -1.5, 0, 1.5, 3 on the default reference box.
std::shared_ptr<const BasisSet> rds_1d_basis(const MdpModel& model);

// True noise law plus a few Gaussian bumps along each noise axis.
std::shared_ptr<const BasisSet> generic_basis(const MdpModel& model);

}  // namespace dqbrm::models
