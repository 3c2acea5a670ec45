#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dqbrm/adp.hpp"
#include "dqbrm/mdp.hpp"
#include "dqbrm/rng.hpp"

namespace dqbrm {

/// One basis density phi^k, possibly time dependent.
class BasisComponent {
 public:
  virtual ~BasisComponent() = default;
  virtual double pdf(int t, const Noise& w) const = 0;
  virtual Noise sample(int t, RngStream& rng) const = 0;
  virtual std::string describe() const = 0;
};

/// Product of independent normals N(mean_k, sd_k^2).
class GaussianComponent : public BasisComponent {
 public:
  GaussianComponent(std::vector<double> mean, std::vector<double> sd);

  double pdf(int t, const Noise& w) const override;
  Noise sample(int t, RngStream& rng) const override;
  std::string describe() const override;

  std::span<const double> mean() const { return mean_; }
  std::span<const double> sd() const { return sd_; }

 private:
  std::vector<double> mean_;
  std::vector<double> sd_;
  double norm_;
};

/// The model's own noise law used as a basis density.
class NoiseLawComponent : public BasisComponent {
 public:
  explicit NoiseLawComponent(std::shared_ptr<const NoiseModel> law) : law_(std::move(law)) {}

  double pdf(int t, const Noise& w) const override { return law_->pdf(t, w); }
  Noise sample(int t, RngStream& rng) const override { return law_->sample(t, rng); }
  std::string describe() const override { return "true-noise-law"; }

 private:
  std::shared_ptr<const NoiseModel> law_;
};

/// Compact reference set W-bar with the uniform density p^u over it.
struct ReferenceBox {
  std::vector<double> lo;
  std::vector<double> hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const;
  bool contains(const Noise& w) const;
  // p^u(w) = C 1{w in box}.
  double density(const Noise& w) const;
};

// Per-dimension box spanning [lo_p, hi_p] marginal quantiles, intersected over t.
ReferenceBox default_reference_box(const NoiseModel& law, int horizon, double lo_p = 0.0005,
                                   double hi_p = 0.9995);

class BasisSet {
 public:
  BasisSet(std::vector<std::shared_ptr<const BasisComponent>> components, ReferenceBox box);

  int size() const { return static_cast<int>(components_.size()); }
  int dim() const { return box_.dim(); }
  const BasisComponent& component(int k) const { return *components_[k]; }
  const ReferenceBox& reference_box() const { return box_; }
  double reference_density(const Noise& w) const { return box_.density(w); }

  void evaluate(int t, const Noise& w, std::span<double> out) const;

 private:
  std::vector<std::shared_ptr<const BasisComponent>> components_;
  ReferenceBox box_;
};

/// Nonnegative mixture weights theta_t(s, a) in R^K.
class MixtureCoefficients {
 public:
  MixtureCoefficients() = default;
  MixtureCoefficients(int horizon, int pairs, int components, double fill = 0.0);

  int horizon() const { return horizon_; }
  int pairs() const { return pairs_; }
  int components() const { return components_; }
  std::span<double> row(int t, int pair) {
    return {data_.data() + offset(t, pair), std::size_t(components_)};
  }
  std::span<const double> row(int t, int pair) const {
    return {data_.data() + offset(t, pair), std::size_t(components_)};
  }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const MixtureCoefficients&, const MixtureCoefficients&) = default;

 private:
  std::size_t offset(int t, int pair) const { return (std::size_t(t) * pairs_ + pair) * components_; }

  int horizon_ = 0;
  int pairs_ = 0;
  int components_ = 0;
  std::vector<double> data_;
};

// sum_k theta_k phi^k(w) / ||theta||_1, or the equal-weight mixture when theta = 0.
double mixture_pdf(std::span<const double> theta, const BasisSet& basis, int t, const Noise& w);

// Component k drawn with probability theta_k / ||theta||_1, then w ~ phi^k.
Noise sample_mixture(std::span<const double> theta, const BasisSet& basis, int t, RngStream& rng);
int sample_component(std::span<const double> theta, RngStream& rng);

struct LikelihoodRatio {
  double value;
  bool capped;
};

// p_t(w) / mixture_pdf(w) clamped to cap. Throws SupportError when the mixture vanishes at w.
LikelihoodRatio likelihood_ratio(const Noise& w, std::span<const double> theta,
                                 const BasisSet& basis, int t, double true_density,
                                 double cap = 1e6);

/// theta <- [theta - beta (theta' phi(w) - |H| p_t(w)) phi(w) p^u(w) / pbar(w)]^+
void update_coefficients(std::span<double> theta, const BasisSet& basis, int t, const Noise& w,
                         double abs_h, double true_density, double mixture_density, double beta);
// Same, computing pbar(w) from theta.
void update_coefficients(std::span<double> theta, const BasisSet& basis, int t, const Noise& w,
                         double abs_h, double true_density, double beta);

/// Midpoint quadrature nodes on the reference box.
struct QuadratureGrid {
  std::vector<Noise> nodes;
  static QuadratureGrid midpoint(const ReferenceBox& box, std::span<const int> points_per_dim);
};

// E[phi(W^u) phi(W^u)'] under the uniform law on the reference box.
Eigen::MatrixXd gram_matrix(const BasisSet& basis, int t, const QuadratureGrid& grid);

// Throws ConfigError naming the near-colinear components when the Gram matrix is
// not positive definite (smallest / largest eigenvalue below threshold).
void check_gram(const Eigen::MatrixXd& gram, double threshold = 1e-10);

// argmin_{theta >= 0} theta' G theta - 2 b' theta by an active-set method.
Eigen::VectorXd nnls_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs);

// Nonnegative least-squares projection of target onto the basis under p^u.
std::vector<double> project_phi(const std::function<double(const Noise&)>& target,
                                const BasisSet& basis, int t, const QuadratureGrid& grid);

/// beta_t / (offset + n)^power; power 1 is harmonic, power in (1/2, 1) polynomial.
struct BetaSchedule {
  std::vector<double> numerator;
  double power = 1.0;
  double offset = 0.0;

  static BetaSchedule harmonic(int horizon, double numerator, double offset = 0.0);
  double step(int t, std::int64_t n) const;
  void validate(int horizon) const;
};

struct RdsConfig {
  std::shared_ptr<const BasisSet> basis;
  BetaSchedule beta;
  double lr_cap = 1e6;
};

struct RdsState {
  AdpState adp;
  MixtureCoefficients theta;
  std::int64_t lr_cap_hits = 0;
};

// Zero tables and theta_0 (broadcast to every (t, pair)); theta_0 empty means all zeros.
RdsState initial_rds_state(const AdpProblem& problem, const RdsConfig& config,
                           std::span<const double> theta0 = {});

/// Dynamic-QBRM ADP with risk-directed sampling of the value-update noise.
RdsState run_with_rds(const AdpProblem& problem, const RdsConfig& config, RdsState state,
                      std::int64_t iterations, const RngStreams& rng,
                      const RunOptions& options = {});

}  // namespace dqbrm
