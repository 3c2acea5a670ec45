#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dqbrm/mdp.hpp"
#include "dqbrm/rds.hpp"

namespace dqbrm::energy {

/// Storage, trading and bidding model. Storage levels 0..s_max; actions are
/// ordered bid pairs (buy <= sell) on the grid 0, step, .., bid_max.
struct EnergyConfig {
  int horizon = 12;
  int s_max = 6;
  std::vector<double> penalty_probs{0.1, 0.05, 0.02, 0.01, 0.01, 0.001, 0.001};
  double sigma_u = 1.0;
  double reward_rate = 5.0;     // a
  double penalty_rate = 500.0;  // b
  double price_base = 100.0;
  double price_amplitude = 50.0;
  double price_var = 3000.0;
  double bid_max = 500.0;
  double bid_step = 50.0;
  int initial_storage = 0;

  // m(t) = amplitude sin(4 pi t / T) + base
  double price_mean(int t) const;
  void validate() const;

  static EnergyConfig small();
};

struct Bids {
  double buy;
  double sell;
};

struct LognormalParams {
  double mu;
  double sigma;
};

// Parameters of the lognormal price P_t with mean m(t) and variance v.
LognormalParams lognormal_params(int t, const EnergyConfig& config);
LognormalParams lognormal_params_from_moments(double mean, double var);

// mu_S(s) = -sigma_U Phi^{-1}(p_s), so that P(mu_S(s) + U < 0) = p_s.
std::vector<double> mu_s_from_probs(const std::vector<double>& penalty_probs, double sigma_u);

// F = |z| (b 1{z < 0} - a 1{z >= 0}) with z = mu_S(s) + u.
double penalty(double mu_s, double u, double reward_rate, double penalty_rate);

// -F + P (1{sell < P} - 1{buy > P} - 1{s = 0} 1{sell < P})
double contribution(int s, Bids bids, double price, double penalty_value);

// [min(s + 1{buy > P} - 1{sell < P}, s_max)]^+
int storage_transition(int s, Bids bids, double price, int s_max);

/// W_{t+1} = (P_{t+1}, U_{t+1}): independent lognormal price and normal U.
/// The law attached to decision epoch t is that of the price at t + 1.
class EnergyNoise : public NoiseModel {
 public:
  explicit EnergyNoise(const EnergyConfig& config);

  int dim() const override { return 2; }
  Noise sample(int t, RngStream& rng) const override;
  double pdf(int t, const Noise& w) const override;
  double marginal_quantile(int t, int k, double p) const override;

  const LognormalParams& price_params(int t) const { return params_[t]; }

 private:
  std::vector<LognormalParams> params_;
  double sigma_u_;
};

class EnergyMdp : public MdpModel {
 public:
  explicit EnergyMdp(EnergyConfig config, std::string name = "energy");

  std::string name() const override { return name_; }
  int horizon() const override { return config_.horizon; }
  int num_states() const override { return config_.s_max + 1; }
  int num_actions() const override { return static_cast<int>(bids_.size()); }
  std::span<const int> feasible_actions(int) const override { return all_actions_; }
  int transition(int t, int s, int a, const Noise& w) const override;
  double cost(int t, int s, int a, const Noise& w) const override;
  const NoiseModel& noise() const override { return *noise_; }
  std::shared_ptr<const NoiseModel> noise_ptr() const override { return noise_; }
  Sense sense() const override { return Sense::maximize; }
  std::string action_label(int a) const override;

  const EnergyConfig& config() const { return config_; }
  const std::vector<Bids>& bids() const { return bids_; }
  std::span<const double> mu_s() const { return mu_s_; }
  // Action index of (buy, sell), or -1 when not on the grid.
  int action_of(double buy, double sell) const;

  // Upper quantile of the price over all t plus b (mu_S span + 5 sigma_U).
  double stage_cost_bound(double price_quantile = 0.99995) const;

 private:
  EnergyConfig config_;
  std::string name_;
  std::vector<Bids> bids_;
  std::vector<int> all_actions_;
  std::vector<double> mu_s_;
  std::shared_ptr<const EnergyNoise> noise_;
};

struct BasisGrid {
  std::vector<double> price_means{50.0, 175.0, 300.0};
  std::vector<double> u_means{-3.0, -1.0, 1.0};
  double price_sd = 750.0;
  double u_sd = 0.25;
};

// The true noise law followed by the bivariate normal grid (price mean outer,
// U mean inner), over the default reference box.
std::shared_ptr<const BasisSet> default_basis(const EnergyMdp& model, const BasisGrid& grid = {});

}  // namespace dqbrm::energy
