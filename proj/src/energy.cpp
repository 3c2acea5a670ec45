#include "dqbrm/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "dqbrm/errors.hpp"

namespace dqbrm::energy {

double EnergyConfig::price_mean(int t) const {
  return price_amplitude * std::sin(4.0 * std::numbers::pi * t / horizon) + price_base;
}

void EnergyConfig::validate() const {
  if (horizon < 1) throw ConfigError("energy.horizon must be positive");
  if (s_max < 0) throw ConfigError("energy.s_max must be nonnegative");
  if (static_cast<int>(penalty_probs.size()) != s_max + 1) {
    throw ConfigError("energy.penalty_probs needs s_max + 1 entries");
  }
  for (std::size_t i = 0; i < penalty_probs.size(); ++i) {
    if (!(penalty_probs[i] > 0.0 && penalty_probs[i] < 1.0)) {
      throw ConfigError("energy.penalty_probs entries must lie in (0, 1)");
    }
    if (i > 0 && penalty_probs[i] > penalty_probs[i - 1]) {
      throw ConfigError("energy.penalty_probs must be nonincreasing");
    }
  }
  if (!(sigma_u > 0.0)) throw ConfigError("energy.sigma_u must be positive");
  if (!(reward_rate > 0.0 && reward_rate < penalty_rate)) {
    throw ConfigError("energy rates must satisfy 0 < reward_rate < penalty_rate");
  }
  if (!(price_var > 0.0)) throw ConfigError("energy.price_var must be positive");
  for (int t = 0; t <= horizon; ++t) {
    if (!(price_mean(t) > 0.0)) throw ConfigError("energy price mean must stay positive");
  }
  if (!(bid_step > 0.0) || !(bid_max >= 0.0)) throw ConfigError("energy bid grid is invalid");
  if (std::abs(bid_max / bid_step - std::round(bid_max / bid_step)) > 1e-9) {
    throw ConfigError("energy.bid_max must be a multiple of energy.bid_step");
  }
  if (initial_storage < 0 || initial_storage > s_max) {
    throw ConfigError("energy.initial_storage must lie in 0..s_max");
  }
}

EnergyConfig EnergyConfig::small() {
  EnergyConfig c;
  c.horizon = 6;
  c.bid_step = 100.0;
  return c;
}

LognormalParams lognormal_params_from_moments(double mean, double var) {
  if (!(mean > 0.0)) throw ConfigError("lognormal price mean must be positive");
  if (!(var >= 0.0)) throw ConfigError("lognormal price variance must be nonnegative");
  const double r = var / (mean * mean);
  return {std::log(mean / std::sqrt(1.0 + r)), std::sqrt(std::log1p(r))};
}

LognormalParams lognormal_params(int t, const EnergyConfig& config) {
  return lognormal_params_from_moments(config.price_mean(t), config.price_var);
}

std::vector<double> mu_s_from_probs(const std::vector<double>& penalty_probs, double sigma_u) {
  std::vector<double> mu;
  mu.reserve(penalty_probs.size());
  for (double p : penalty_probs) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("penalty probabilities must lie in (0, 1)");
    mu.push_back(-sigma_u * standard_normal_quantile(p));
  }
  return mu;
}

double penalty(double mu_s, double u, double reward_rate, double penalty_rate) {
  const double z = mu_s + u;
  return z < 0.0 ? -z * penalty_rate : -z * reward_rate;
}

double contribution(int s, Bids bids, double price, double penalty_value) {
  if (!(bids.buy >= 0.0 && bids.buy <= bids.sell)) {
    throw std::invalid_argument("contribution: bids must satisfy 0 <= buy <= sell");
  }
  const bool sell = bids.sell < price;
  const bool buy = bids.buy > price;
  double trade = 0.0;
  if (sell && s != 0) trade += price;
  if (buy) trade -= price;
  return -penalty_value + trade;
}

int storage_transition(int s, Bids bids, double price, int s_max) {
  const int next = s + (bids.buy > price ? 1 : 0) - (bids.sell < price ? 1 : 0);
  return std::max(0, std::min(next, s_max));
}

EnergyNoise::EnergyNoise(const EnergyConfig& config) : sigma_u_(config.sigma_u) {
  params_.reserve(config.horizon);
  for (int t = 0; t < config.horizon; ++t) params_.push_back(lognormal_params(t + 1, config));
}

Noise EnergyNoise::sample(int t, RngStream& rng) const {
  const auto& p = params_[t];
  Noise w{};
  w[0] = std::exp(p.mu + p.sigma * sample_standard_normal(rng));
  w[1] = sigma_u_ * sample_standard_normal(rng);
  return w;
}

double EnergyNoise::pdf(int t, const Noise& w) const {
  if (!(w[0] > 0.0)) return 0.0;
  const auto& p = params_[t];
  const double z = (std::log(w[0]) - p.mu) / p.sigma;
  const double price = standard_normal_pdf(z) / (p.sigma * w[0]);
  return price * standard_normal_pdf(w[1] / sigma_u_) / sigma_u_;
}

double EnergyNoise::marginal_quantile(int t, int k, double p) const {
  const double z = standard_normal_quantile(p);
  if (k == 0) return std::exp(params_[t].mu + params_[t].sigma * z);
  return sigma_u_ * z;
}

EnergyMdp::EnergyMdp(EnergyConfig config, std::string name)
    : config_(std::move(config)), name_(std::move(name)) {
  config_.validate();
  const int levels = static_cast<int>(std::lround(config_.bid_max / config_.bid_step));
  for (int i = 0; i <= levels; ++i) {
    for (int j = i; j <= levels; ++j) bids_.push_back({i * config_.bid_step, j * config_.bid_step});
  }
  all_actions_.resize(bids_.size());
  for (std::size_t a = 0; a < bids_.size(); ++a) all_actions_[a] = static_cast<int>(a);
  mu_s_ = mu_s_from_probs(config_.penalty_probs, config_.sigma_u);
  noise_ = std::make_shared<EnergyNoise>(config_);
}

int EnergyMdp::transition(int, int s, int a, const Noise& w) const {
  return storage_transition(s, bids_[a], w[0], config_.s_max);
}

double EnergyMdp::cost(int, int s, int a, const Noise& w) const {
  const double f = penalty(mu_s_[s], w[1], config_.reward_rate, config_.penalty_rate);
  return contribution(s, bids_[a], w[0], f);
}

std::string EnergyMdp::action_label(int a) const {
  std::ostringstream os;
  os << '(' << bids_[a].buy << ',' << bids_[a].sell << ')';
  return os.str();
}

int EnergyMdp::action_of(double buy, double sell) const {
  for (std::size_t a = 0; a < bids_.size(); ++a) {
    if (bids_[a].buy == buy && bids_[a].sell == sell) return static_cast<int>(a);
  }
  return -1;
}

double EnergyMdp::stage_cost_bound(double price_quantile) const {
  double price = 0.0;
  for (int t = 0; t < config_.horizon; ++t) price = std::max(price, noise_->marginal_quantile(t, 0, price_quantile));
  const auto [lo, hi] = std::minmax_element(mu_s_.begin(), mu_s_.end());
  return price + config_.penalty_rate * ((*hi - *lo) + 5.0 * config_.sigma_u);
}

std::shared_ptr<const BasisSet> default_basis(const EnergyMdp& model, const BasisGrid& grid) {
  std::vector<std::shared_ptr<const BasisComponent>> components;
  components.push_back(std::make_shared<NoiseLawComponent>(model.noise_ptr()));
  for (double pm : grid.price_means) {
    for (double um : grid.u_means) {
      components.push_back(std::make_shared<GaussianComponent>(std::vector<double>{pm, um},
                                                               std::vector<double>{grid.price_sd, grid.u_sd}));
    }
  }
  return std::make_shared<BasisSet>(std::move(components),
                                    default_reference_box(model.noise(), model.horizon()));
}

}  // namespace dqbrm::energy
