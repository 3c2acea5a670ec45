#include "dqbrm/risk_measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dqbrm/errors.hpp"

namespace dqbrm {

namespace {

// Cumulative weights are compared against alpha with this slack so that
// e.g. five weights of 0.1 reach alpha = 0.5 despite rounding.
constexpr double kCdfSlack = 1e-12;

double tail_term(double x, double q, double alpha) {
  return q + std::max(x - q, 0.0) / (1.0 - alpha);
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate(const RiskLevels& levels, const Combiner& combiner) {
  std::visit(Overloaded{
                 [](const VaRCombiner&) {},
                 [](const CVaRCombiner&) {},
                 [](const MeanCVaRCombiner& c) {
                   if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) {
                     throw ConfigError("mean-CVaR weight lambda must lie in [0, 1]");
                   }
                 },
                 [&](const AffineMixCombiner& c) {
                   if (c.var_weights.size() != levels.size() ||
                       c.cvar_weights.size() != levels.size()) {
                     throw ConfigError("affine mix needs one VaR and one CVaR weight per risk level");
                   }
                   double total = c.mean_weight;
                   bool negative = c.mean_weight < 0.0;
                   for (std::size_t i = 0; i < levels.size(); ++i) {
                     total += c.var_weights[i] + c.cvar_weights[i];
                     negative = negative || c.var_weights[i] < 0.0 || c.cvar_weights[i] < 0.0;
                   }
                   if (negative) throw ConfigError("affine mix weights must be nonnegative");
                   if (std::abs(total - 1.0) > 1e-9) {
                     throw ConfigError("affine mix weights must sum to one");
                   }
                 },
             },
             combiner);
}

}  // namespace

RiskLevels::RiskLevels(std::vector<double> alphas) : alphas_(std::move(alphas)) {
  if (alphas_.empty()) throw ConfigError("at least one risk level is required");
  for (std::size_t i = 0; i < alphas_.size(); ++i) {
    if (!(alphas_[i] > 0.0 && alphas_[i] < 1.0)) {
      throw ConfigError("risk levels must lie in the open interval (0, 1)");
    }
    if (i > 0 && !(alphas_[i] > alphas_[i - 1])) {
      throw ConfigError("risk levels must be strictly increasing");
    }
  }
}

double default_lipschitz(const RiskLevels& levels, const Combiner& combiner) {
  const double a1 = levels[0];
  return std::visit(Overloaded{
                        [](const VaRCombiner&) { return 1.0; },
                        [&](const CVaRCombiner&) { return 1.0 + 1.0 / (1.0 - a1); },
                        [&](const MeanCVaRCombiner& c) {
                          return (1.0 - c.lambda) + c.lambda * (1.0 + 1.0 / (1.0 - a1));
                        },
                        [&](const AffineMixCombiner& c) {
                          double l = c.mean_weight;
                          for (std::size_t i = 0; i < levels.size(); ++i) {
                            l += c.var_weights[i] +
                                 c.cvar_weights[i] * (1.0 + 1.0 / (1.0 - levels[i]));
                          }
                          return std::max(l, 1e-12);
                        },
                    },
                    combiner);
}

QbrmSpec::QbrmSpec(RiskLevels levels, Combiner combiner)
    : levels_(std::move(levels)), combiner_(std::move(combiner)), lipschitz_(0.0) {
  validate(levels_, combiner_);
  lipschitz_ = default_lipschitz(levels_, combiner_);
}

QbrmSpec::QbrmSpec(RiskLevels levels, Combiner combiner, double lipschitz_phi)
    : levels_(std::move(levels)), combiner_(std::move(combiner)), lipschitz_(lipschitz_phi) {
  validate(levels_, combiner_);
  if (!(lipschitz_ > 0.0)) throw ConfigError("Lipschitz constant of Phi must be positive");
}

QbrmSpec QbrmSpec::var(double alpha) { return {RiskLevels({alpha}), VaRCombiner{}}; }

QbrmSpec QbrmSpec::cvar(double alpha) { return {RiskLevels({alpha}), CVaRCombiner{}}; }

QbrmSpec QbrmSpec::mean_cvar(double lambda, double alpha) {
  return {RiskLevels({alpha}), MeanCVaRCombiner{lambda}};
}

double QbrmSpec::combine(double x, const double* q) const {
  switch (combiner_.index()) {
    case 0:
      return q[0];
    case 1:
      return tail_term(x, q[0], levels_[0]);
    case 2: {
      const double lambda = std::get<MeanCVaRCombiner>(combiner_).lambda;
      return (1.0 - lambda) * x + lambda * tail_term(x, q[0], levels_[0]);
    }
    default: {
      const auto& c = std::get<AffineMixCombiner>(combiner_);
      double v = c.mean_weight * x;
      for (std::size_t i = 0; i < levels_.size(); ++i) {
        v += c.var_weights[i] * q[i] + c.cvar_weights[i] * tail_term(x, q[i], levels_[i]);
      }
      return v;
    }
  }
}

std::string QbrmSpec::name() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const VaRCombiner&) { os << "VaR(" << levels_[0] << ")"; },
                 [&](const CVaRCombiner&) { os << "CVaR(" << levels_[0] << ")"; },
                 [&](const MeanCVaRCombiner& c) {
                   os << "MeanCVaR(lambda=" << c.lambda << ", alpha=" << levels_[0] << ")";
                 },
                 [&](const AffineMixCombiner&) { os << "AffineMix(m=" << levels_.size() << ")"; },
             },
             combiner_);
  return os.str();
}

double phi(double x, std::span<const double> quantiles, const QbrmSpec& spec) {
  if (quantiles.size() != spec.num_levels()) {
    throw std::invalid_argument("phi: expected one quantile per risk level");
  }
  return spec.combine(x, quantiles.data());
}

WeightedSample::WeightedSample(std::vector<double> values, std::vector<double> weights)
    : values_(std::move(values)), weights_(std::move(weights)) {
  if (values_.size() != weights_.size()) {
    throw std::invalid_argument("weighted sample: values and weights differ in length");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weighted sample: weights must be finite and nonnegative");
    }
    total += w;
  }
  if (!values_.empty()) {
    if (!(total > 0.0)) throw std::invalid_argument("weighted sample: weights sum to zero");
    if (std::abs(total - 1.0) > 1e-12) {
      for (double& w : weights_) w /= total;
    }
  }
}

WeightedSample WeightedSample::uniform(std::vector<double> values) {
  const std::size_t n = values.size();
  std::vector<double> weights(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  return {std::move(values), std::move(weights)};
}

namespace {

void require_nonempty(const WeightedSample& sample, const char* what) {
  if (sample.empty()) throw std::invalid_argument(std::string(what) + ": empty sample");
}

std::vector<std::size_t> sorted_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return order;
}

double quantile_from_order(const WeightedSample& sample, const std::vector<std::size_t>& order,
                           double alpha) {
  const auto values = sample.values();
  const auto weights = sample.weights();
  double cum = 0.0;
  for (std::size_t idx : order) {
    cum += weights[idx];
    if (cum >= alpha - kCdfSlack) return values[idx];
  }
  return values[order.back()];
}

}  // namespace

double empirical_quantile(const WeightedSample& sample, double alpha) {
  require_nonempty(sample, "empirical_quantile");
  return quantile_from_order(sample, sorted_order(sample.values()), alpha);
}

double empirical_cvar(const WeightedSample& sample, double alpha) {
  require_nonempty(sample, "empirical_cvar");
  const double q = empirical_quantile(sample, alpha);
  const auto values = sample.values();
  const auto weights = sample.weights();
  double tail = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) tail += weights[j] * std::max(values[j] - q, 0.0);
  return q + tail / (1.0 - alpha);
}

double empirical_mean(const WeightedSample& sample) {
  require_nonempty(sample, "empirical_mean");
  double m = 0.0;
  for (std::size_t j = 0; j < sample.size(); ++j) m += sample.weights()[j] * sample.values()[j];
  return m;
}

double empirical_qbrm(const WeightedSample& sample, const QbrmSpec& spec) {
  require_nonempty(sample, "empirical_qbrm");
  const auto order = sorted_order(sample.values());
  std::vector<double> q(spec.num_levels());
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = quantile_from_order(sample, order, spec.levels()[i]);
  }
  double total = 0.0;
  for (std::size_t j = 0; j < sample.size(); ++j) {
    total += sample.weights()[j] * spec.combine(sample.values()[j], q.data());
  }
  return total;
}

double uniform_sample_qbrm(std::span<double> values, const QbrmSpec& spec) {
  if (values.empty()) throw std::invalid_argument("empirical_qbrm: empty sample");
  const std::size_t n = values.size();
  const double w = 1.0 / static_cast<double>(n);
  std::vector<double> q(spec.num_levels());
  for (std::size_t i = 0; i < q.size(); ++i) {
    // Smallest k with k/n >= alpha, matching the cumulative-weight scan.
    const double alpha = spec.levels()[i];
    std::size_t k = 1;
    double cum = w;
    const auto guess = static_cast<std::size_t>(std::max(0.0, std::floor(alpha * n) - 1.0));
    if (guess > 0) {
      k = guess;
      cum = static_cast<double>(k) * w;
    }
    while (k < n && cum < alpha - kCdfSlack) {
      ++k;
      cum = static_cast<double>(k) * w;
    }
    auto nth = values.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(values.begin(), nth, values.end());
    q[i] = *nth;
  }
  double total = 0.0;
  for (double x : values) total += spec.combine(x, q.data());
  return total * w;
}

}  // namespace dqbrm
