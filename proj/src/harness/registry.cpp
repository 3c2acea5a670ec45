#include <algorithm>
#include <cmath>

#include "dqbrm/energy.hpp"
#include "dqbrm/errors.hpp"
#include "dqbrm/harness.hpp"
#include "dqbrm/models.hpp"

namespace dqbrm {

using nlohmann::json;

namespace {

template <class T>
void take(const json& overrides, const char* key, T& out, std::vector<std::string>& used) {
  auto it = overrides.find(key);
  if (it == overrides.end()) return;
  used.emplace_back(key);
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field 'model.overrides.") + key + "' has the wrong type");
  }
}

void reject_unused(const json& overrides, const std::vector<std::string>& used, const std::string& model) {
  for (const auto& item : overrides.items()) {
    if (std::find(used.begin(), used.end(), item.key()) == used.end()) {
      throw ConfigError("unknown field 'model.overrides." + item.key() + "' for model '" + model + "'");
    }
  }
}

ModelEntry energy_entry(const ModelConfig& config, energy::EnergyConfig ec) {
  std::vector<std::string> used;
  const json& o = config.overrides;
  take(o, "horizon", ec.horizon, used);
  take(o, "s_max", ec.s_max, used);
  take(o, "penalty_probs", ec.penalty_probs, used);
  take(o, "sigma_u", ec.sigma_u, used);
  take(o, "reward_rate", ec.reward_rate, used);
  take(o, "penalty_rate", ec.penalty_rate, used);
  take(o, "price_base", ec.price_base, used);
  take(o, "price_amplitude", ec.price_amplitude, used);
  take(o, "price_var", ec.price_var, used);
  take(o, "bid_max", ec.bid_max, used);
  take(o, "bid_step", ec.bid_step, used);
  take(o, "initial_storage", ec.initial_storage, used);
  reject_unused(o, used, config.name);
  ec.validate();
  auto mdp = std::make_shared<energy::EnergyMdp>(ec, config.name);
  ModelEntry entry;
  entry.model = mdp;
  entry.stage_cost_bound = mdp->stage_cost_bound();
  entry.initial_state = ec.initial_storage;
  entry.basis = energy::default_basis(*mdp);
  return entry;
}

}  // namespace

std::vector<std::string> model_names() { return {"energy", "energy-small", "testbed", "toy-chain", "rds-1d"}; }

ModelEntry make_model(const ModelConfig& config) {
  if (!config.overrides.is_object()) throw ConfigError("field 'model.overrides' must be an object");
  if (config.name == "energy") return energy_entry(config, energy::EnergyConfig{});
  if (config.name == "energy-small") return energy_entry(config, energy::EnergyConfig::small());

  ModelEntry entry;
  if (config.name == "testbed") {
    models::TestbedParams params;
    entry.model = models::testbed(params);
    entry.stage_cost_bound = params.stage_cost_bound();
  } else if (config.name == "toy-chain") {
    entry.model = models::toy_chain();
    entry.stage_cost_bound = 4.5;
  } else if (config.name == "rds-1d") {
    entry.model = models::rds_1d();
    entry.stage_cost_bound = 5.0;
  } else {
    std::string known;
    for (const auto& n : model_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("invalid field 'model.name': unknown model '" + config.name + "' (known: " + known + ")");
  }
  reject_unused(config.overrides, {}, config.name);
  entry.basis = config.name == "rds-1d" ? models::rds_1d_basis(*entry.model) : models::generic_basis(*entry.model);
  return entry;
}

QbrmSpec make_spec(const RiskConfig& risk) {
  RiskLevels levels(risk.alphas);
  Combiner combiner;
  if (risk.combiner == "var") {
    combiner = VaRCombiner{};
  } else if (risk.combiner == "cvar") {
    combiner = CVaRCombiner{};
  } else if (risk.combiner == "mean_cvar") {
    combiner = MeanCVaRCombiner{risk.lambda};
  } else if (risk.combiner == "affine") {
    combiner = AffineMixCombiner{risk.mean_weight, risk.var_weights, risk.cvar_weights};
  } else {
    throw ConfigError("invalid field 'risk.combiner': " + risk.combiner);
  }
  try {
    return risk.lipschitz ? QbrmSpec(levels, combiner, *risk.lipschitz) : QbrmSpec(levels, combiner);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid field 'risk': ") + e.what());
  }
}

namespace {

std::vector<double> per_stage(const std::vector<double>& v, int horizon, const char* field) {
  if (static_cast<int>(v.size()) == horizon) return v;
  if (v.size() == 1) return std::vector<double>(horizon, v[0]);
  throw ConfigError(std::string("invalid field '") + field + "': needs 1 or " + std::to_string(horizon) + " entries");
}

}  // namespace

AdpProblem make_problem(const ExperimentConfig& config, const ModelEntry& entry, const QbrmSpec& spec) {
  const MdpModel& model = *entry.model;
  const int T = model.horizon();
  StateActionSpace space(model);
  const int d = space.size();
  const double bound = config.solver.stage_cost_bound.value_or(entry.stage_cost_bound);
  StepsizeSchedule steps{per_stage(config.solver.gamma, T, "solver.gamma"),
                         per_stage(config.solver.eta, T, "solver.eta"), config.solver.gamma_offset,
                         config.solver.eta_offset};
  for (const auto& w : config.trace.watched) {
    if (w.t < 0 || w.t > T || w.pair < 0 || w.pair >= d) {
      throw ConfigError("invalid field 'trace.watched': (" + std::to_string(w.t) + ", " +
                        std::to_string(w.pair) + ") is outside the table");
    }
  }
  return AdpProblem(entry.model, spec, ProjectionBoxes::from_stage_cost_bound(T, d, spec, bound), steps,
                    SamplingPolicyConfig{config.solver.exploration / d});
}

RdsConfig make_rds(const ExperimentConfig& config, const ModelEntry& entry) {
  const MdpModel& model = *entry.model;
  const int T = model.horizon();
  std::shared_ptr<const BasisSet> basis = entry.basis;
  if (!config.rds.basis.empty()) {
    std::vector<std::shared_ptr<const BasisComponent>> components;
    if (config.rds.basis_true_law) components.push_back(std::make_shared<NoiseLawComponent>(model.noise_ptr()));
    for (const auto& g : config.rds.basis) {
      if (static_cast<int>(g.mean.size()) != model.noise().dim()) {
        throw ConfigError("invalid field 'rds.basis': component dimension differs from the noise dimension");
      }
      components.push_back(std::make_shared<GaussianComponent>(g.mean, g.sd));
    }
    basis = std::make_shared<BasisSet>(std::move(components), default_reference_box(model.noise(), T));
  }
  const int dim = basis->dim();
  std::vector<int> points(dim, dim == 1 ? 400 : 60);
  check_gram(gram_matrix(*basis, 0, QuadratureGrid::midpoint(basis->reference_box(), points)));
  if (!config.rds.theta0.empty() && static_cast<int>(config.rds.theta0.size()) != basis->size()) {
    throw ConfigError("invalid field 'rds.theta0': needs " + std::to_string(basis->size()) + " entries");
  }
  RdsConfig rds;
  rds.basis = basis;
  rds.beta = BetaSchedule{per_stage(config.rds.beta, T, "rds.beta"), config.rds.beta_power, config.rds.beta_offset};
  rds.lr_cap = config.rds.lr_cap;
  return rds;
}

}  // namespace dqbrm
