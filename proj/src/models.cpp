#include "dqbrm/models.hpp"

#include <algorithm>

namespace dqbrm::models {

double TestbedParams::stage_cost_bound() const {
  double c = 0.0;
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) c = std::max(c, base_cost(horizon - 1, s, a) + scale[s][a]);
  }
  return c;
}

std::shared_ptr<const MdpModel> testbed(const TestbedParams& params) {
  auto noise = std::make_shared<UniformBoxNoise>(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0});
  auto transition = [params](int, int s, int a, const Noise& w) {
    if (w[1] < params.lo[s][a]) return 0;
    if (w[1] < params.hi[s][a]) return 1;
    return 2;
  };
  auto cost = [params](int t, int s, int a, const Noise& w) {
    return params.base_cost(t, s, a) + params.scale[s][a] * w[0];
  };
  return std::make_shared<FunctionalMdp>("testbed", params.horizon, 3, 2,
                                         std::vector<std::vector<int>>(3, {0, 1}), transition, cost,
                                         noise);
}

std::shared_ptr<const MdpModel> toy_chain() {
  auto noise = std::make_shared<UniformBoxNoise>(std::vector<double>{0.0}, std::vector<double>{1.0});
  auto transition = [](int, int s, int a, const Noise& w) {
    return a == 1 && w[0] < 0.8 ? std::min(s + 1, 3) : s;
  };
  auto cost = [](int, int s, int a, const Noise& w) { return (3.0 - s) + a * (0.5 + w[0]); };
  return std::make_shared<FunctionalMdp>("toy-chain", 4, 4, 2,
                                         std::vector<std::vector<int>>(4, {0, 1}), transition, cost,
                                         noise);
}

std::shared_ptr<const MdpModel> rds_1d() {
  auto noise = std::make_shared<NormalNoise>(0.0, 1.0);
  return std::make_shared<FunctionalMdp>(
      "rds-1d", 1, 1, 1, std::vector<std::vector<int>>{{0}}, [](int, int, int, const Noise&) { return 0; },
      [](int, int, int, const Noise& w) { return w[0]; }, noise);
}

std::shared_ptr<const BasisSet> rds_1d_basis(const MdpModel& model) {
  std::vector<std::shared_ptr<const BasisComponent>> components;
  for (double m : {-1.5, 0.0, 1.5, 3.0}) {
    components.push_back(std::make_shared<GaussianComponent>(std::vector<double>{m}, std::vector<double>{1.0}));
  }
  return std::make_shared<BasisSet>(std::move(components),
                                    default_reference_box(model.noise(), model.horizon()));
}

std::shared_ptr<const BasisSet> generic_basis(const MdpModel& model) {
  const NoiseModel& law = model.noise();
  const int dim = law.dim();
  ReferenceBox box = default_reference_box(law, model.horizon());
  std::vector<std::shared_ptr<const BasisComponent>> components;
  components.push_back(std::make_shared<NoiseLawComponent>(model.noise_ptr()));
  std::vector<double> centre(dim), sd(dim);
  for (int k = 0; k < dim; ++k) {
    centre[k] = 0.5 * (box.lo[k] + box.hi[k]);
    sd[k] = 0.5 * (box.hi[k] - box.lo[k]);
  }
  for (int k = 0; k < dim; ++k) {
    for (double frac : {0.25, 0.9}) {
      std::vector<double> mean = centre;
      mean[k] = box.lo[k] + frac * (box.hi[k] - box.lo[k]);
      std::vector<double> s = sd;
      s[k] = 0.25 * (box.hi[k] - box.lo[k]);
      components.push_back(std::make_shared<GaussianComponent>(mean, s));
    }
  }
  return std::make_shared<BasisSet>(std::move(components), std::move(box));
}

}  // namespace dqbrm::models
