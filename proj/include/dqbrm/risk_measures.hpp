#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace dqbrm {

/// Risk levels alpha_1 < ... < alpha_m, each in (0, 1).
class RiskLevels {
 public:
  explicit RiskLevels(std::vector<double> alphas);

  std::span<const double> alphas() const { return alphas_; }
  std::size_t size() const { return alphas_.size(); }
  double operator[](std::size_t i) const { return alphas_[i]; }

  friend bool operator==(const RiskLevels&, const RiskLevels&) = default;

 private:
  std::vector<double> alphas_;
};

// Phi(x, q) = q_1.
struct VaRCombiner {
  friend bool operator==(const VaRCombiner&, const VaRCombiner&) = default;
};

// Phi(x, q) = q_1 + (x - q_1)^+ / (1 - alpha_1).
struct CVaRCombiner {
  friend bool operator==(const CVaRCombiner&, const CVaRCombiner&) = default;
};

// Phi(x, q) = (1 - lambda) x + lambda [q_1 + (x - q_1)^+ / (1 - alpha_1)].
struct MeanCVaRCombiner {
  double lambda = 0.5;
  friend bool operator==(const MeanCVaRCombiner&, const MeanCVaRCombiner&) = default;
};

// Phi(x, q) = w_mean x + sum_i w_var_i q_i + sum_i w_cvar_i [q_i + (x - q_i)^+ / (1 - alpha_i)].
// Weights are nonnegative and sum to one.
struct AffineMixCombiner {
  double mean_weight = 0.0;
  std::vector<double> var_weights;
  std::vector<double> cvar_weights;
  friend bool operator==(const AffineMixCombiner&, const AffineMixCombiner&) = default;
};

using Combiner = std::variant<VaRCombiner, CVaRCombiner, MeanCVaRCombiner, AffineMixCombiner>;

/// A quantile-based risk measure rho(X) = E[Phi(X, q^{alpha_1}(X), ..., q^{alpha_m}(X))].
class QbrmSpec {
 public:
  QbrmSpec(RiskLevels levels, Combiner combiner);
  QbrmSpec(RiskLevels levels, Combiner combiner, double lipschitz_phi);

  static QbrmSpec var(double alpha);
  static QbrmSpec cvar(double alpha);
  static QbrmSpec mean_cvar(double lambda, double alpha);

  const RiskLevels& levels() const { return levels_; }
  const Combiner& combiner() const { return combiner_; }
  std::size_t num_levels() const { return levels_.size(); }
  double lipschitz_phi() const { return lipschitz_; }

  // Phi evaluated at a realization x and quantile estimates q (length m). No
  // length check; see dqbrm::phi for the checked entry point.
  double combine(double x, const double* q) const;

  std::string name() const;

  friend bool operator==(const QbrmSpec&, const QbrmSpec&) = default;

 private:
  RiskLevels levels_;
  Combiner combiner_;
  double lipschitz_;
};

// Upper bound of the l1-Lipschitz constant of Phi for the built-in combiners.
double default_lipschitz(const RiskLevels& levels, const Combiner& combiner);

double phi(double x, std::span<const double> quantiles, const QbrmSpec& spec);

/// Empirical distribution; weights are renormalized on construction.
class WeightedSample {
 public:
  WeightedSample(std::vector<double> values, std::vector<double> weights);

  static WeightedSample uniform(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
};

// inf{u in sample : P(X <= u) >= alpha}.
double empirical_quantile(const WeightedSample& sample, double alpha);

double empirical_cvar(const WeightedSample& sample, double alpha);

double empirical_qbrm(const WeightedSample& sample, const QbrmSpec& spec);

double empirical_mean(const WeightedSample& sample);

// Equal-weight fast path used by the SAA recursion. Reorders `values`.
double uniform_sample_qbrm(std::span<double> values, const QbrmSpec& spec);

}  // namespace dqbrm
