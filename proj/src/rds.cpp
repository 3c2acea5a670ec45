#include "dqbrm/rds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "adp_loop.hpp"
#include "dqbrm/errors.hpp"

namespace dqbrm {

GaussianComponent::GaussianComponent(std::vector<double> mean, std::vector<double> sd)
    : mean_(std::move(mean)), sd_(std::move(sd)), norm_(1.0) {
  if (mean_.empty() || mean_.size() != sd_.size() || mean_.size() > kMaxNoiseDim) {
    throw ConfigError("gaussian basis: mean and sd must have equal, supported dimension");
  }
  for (double s : sd_) {
    if (!(s > 0.0)) throw ConfigError("gaussian basis: standard deviations must be positive");
    norm_ /= s * std::sqrt(2.0 * std::numbers::pi);
  }
}

double GaussianComponent::pdf(int, const Noise& w) const {
  double e = 0.0;
  for (std::size_t k = 0; k < mean_.size(); ++k) {
    const double z = (w[k] - mean_[k]) / sd_[k];
    e += z * z;
  }
  return norm_ * std::exp(-0.5 * e);
}

Noise GaussianComponent::sample(int, RngStream& rng) const {
  Noise w{};
  for (std::size_t k = 0; k < mean_.size(); ++k) w[k] = mean_[k] + sd_[k] * sample_standard_normal(rng);
  return w;
}

std::string GaussianComponent::describe() const {
  std::ostringstream os;
  os << "gaussian(mean=[";
  for (std::size_t k = 0; k < mean_.size(); ++k) os << (k ? "," : "") << mean_[k];
  os << "],sd=[";
  for (std::size_t k = 0; k < sd_.size(); ++k) os << (k ? "," : "") << sd_[k];
  os << "])";
  return os.str();
}

double ReferenceBox::volume() const {
  double v = 1.0;
  for (std::size_t k = 0; k < lo.size(); ++k) v *= hi[k] - lo[k];
  return v;
}

bool ReferenceBox::contains(const Noise& w) const {
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (w[k] < lo[k] || w[k] > hi[k]) return false;
  }
  return true;
}

double ReferenceBox::density(const Noise& w) const { return contains(w) ? 1.0 / volume() : 0.0; }

ReferenceBox default_reference_box(const NoiseModel& law, int horizon, double lo_p, double hi_p) {
  ReferenceBox box;
  const int dim = law.dim();
  box.lo.assign(dim, -std::numeric_limits<double>::infinity());
  box.hi.assign(dim, std::numeric_limits<double>::infinity());
  for (int t = 0; t < horizon; ++t) {
    for (int k = 0; k < dim; ++k) {
      box.lo[k] = std::max(box.lo[k], law.marginal_quantile(t, k, lo_p));
      box.hi[k] = std::min(box.hi[k], law.marginal_quantile(t, k, hi_p));
    }
  }
  for (int k = 0; k < dim; ++k) {
    if (!(box.hi[k] > box.lo[k])) {
      throw ConfigError("reference box is empty in dimension " + std::to_string(k) +
                        " after intersecting over stages");
    }
  }
  return box;
}

BasisSet::BasisSet(std::vector<std::shared_ptr<const BasisComponent>> components, ReferenceBox box)
    : components_(std::move(components)), box_(std::move(box)) {
  if (components_.empty()) throw ConfigError("basis set needs at least one component");
  if (box_.lo.empty() || box_.lo.size() != box_.hi.size()) {
    throw ConfigError("reference box has inconsistent dimensions");
  }
  for (int k = 0; k < box_.dim(); ++k) {
    if (!(box_.hi[k] > box_.lo[k]) || !std::isfinite(box_.lo[k]) || !std::isfinite(box_.hi[k])) {
      throw ConfigError("reference box must be a nonempty compact box");
    }
  }
}

void BasisSet::evaluate(int t, const Noise& w, std::span<double> out) const {
  for (std::size_t k = 0; k < components_.size(); ++k) out[k] = components_[k]->pdf(t, w);
}

MixtureCoefficients::MixtureCoefficients(int horizon, int pairs, int components, double fill)
    : horizon_(horizon),
      pairs_(pairs),
      components_(components),
      data_(std::size_t(horizon) * pairs * components, fill) {}

namespace {

double l1(std::span<const double> theta) {
  double total = 0.0;
  for (double v : theta) total += v;
  return total;
}

}  // namespace

double mixture_pdf(std::span<const double> theta, const BasisSet& basis, int t, const Noise& w) {
  const int K = basis.size();
  const double total = l1(theta);
  double p = 0.0;
  if (total > 0.0) {
    for (int k = 0; k < K; ++k) {
      if (theta[k] > 0.0) p += theta[k] * basis.component(k).pdf(t, w);
    }
    return p / total;
  }
  for (int k = 0; k < K; ++k) p += basis.component(k).pdf(t, w);
  return p / K;
}

int sample_component(std::span<const double> theta, RngStream& rng) {
  const int K = static_cast<int>(theta.size());
  const double total = l1(theta);
  if (!(total > 0.0)) return static_cast<int>(rng.below(K));
  const double target = rng.uniform() * total;
  double cum = 0.0;
  int last_positive = 0;
  for (int k = 0; k < K; ++k) {
    if (theta[k] <= 0.0) continue;
    cum += theta[k];
    last_positive = k;
    if (target < cum) return k;
  }
  return last_positive;
}

Noise sample_mixture(std::span<const double> theta, const BasisSet& basis, int t, RngStream& rng) {
  const int k = sample_component(theta, rng);
  return basis.component(k).sample(t, rng);
}

LikelihoodRatio likelihood_ratio(const Noise& w, std::span<const double> theta,
                                 const BasisSet& basis, int t, double true_density, double cap) {
  const double pbar = mixture_pdf(theta, basis, t, w);
  if (!(pbar > 0.0)) {
    throw SupportError("sampling mixture has zero density at a drawn point; the basis does not "
                       "cover the noise support");
  }
  const double ratio = true_density / pbar;
  if (ratio > cap) return {cap, true};
  return {ratio, false};
}

void update_coefficients(std::span<double> theta, const BasisSet& basis, int t, const Noise& w,
                         double abs_h, double true_density, double mixture_density, double beta) {
  const double pu = basis.reference_density(w);
  if (pu == 0.0 || beta == 0.0) return;
  if (!(mixture_density > 0.0)) {
    throw SupportError("sampling mixture density vanished inside the reference box");
  }
  const int K = basis.size();
  double phi_buf[64];
  std::vector<double> phi_heap;
  double* phi = phi_buf;
  if (K > 64) {
    phi_heap.resize(K);
    phi = phi_heap.data();
  }
  basis.evaluate(t, w, {phi, std::size_t(K)});
  double fit = 0.0;
  for (int k = 0; k < K; ++k) fit += theta[k] * phi[k];
  const double scale = beta * (fit - abs_h * true_density) * pu / mixture_density;
  for (int k = 0; k < K; ++k) theta[k] = std::max(0.0, theta[k] - scale * phi[k]);
}

void update_coefficients(std::span<double> theta, const BasisSet& basis, int t, const Noise& w,
                         double abs_h, double true_density, double beta) {
  update_coefficients(theta, basis, t, w, abs_h, true_density, mixture_pdf(theta, basis, t, w), beta);
}

QuadratureGrid QuadratureGrid::midpoint(const ReferenceBox& box, std::span<const int> points_per_dim) {
  const int dim = box.dim();
  if (static_cast<int>(points_per_dim.size()) != dim) {
    throw ConfigError("quadrature grid: one point count per dimension is required");
  }
  std::size_t total = 1;
  for (int k = 0; k < dim; ++k) {
    if (points_per_dim[k] < 1) throw ConfigError("quadrature grid: point counts must be positive");
    total *= static_cast<std::size_t>(points_per_dim[k]);
  }
  QuadratureGrid grid;
  grid.nodes.resize(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    Noise w{};
    for (int k = dim - 1; k >= 0; --k) {
      const auto n = static_cast<std::size_t>(points_per_dim[k]);
      const std::size_t j = rem % n;
      rem /= n;
      const double h = (box.hi[k] - box.lo[k]) / static_cast<double>(n);
      w[k] = box.lo[k] + (static_cast<double>(j) + 0.5) * h;
    }
    grid.nodes[idx] = w;
  }
  return grid;
}

Eigen::MatrixXd gram_matrix(const BasisSet& basis, int t, const QuadratureGrid& grid) {
  const int K = basis.size();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd phi(K);
  for (const Noise& w : grid.nodes) {
    basis.evaluate(t, w, {phi.data(), std::size_t(K)});
    gram.noalias() += phi * phi.transpose();
  }
  return gram / static_cast<double>(grid.nodes.size());
}

void check_gram(const Eigen::MatrixXd& gram, double threshold) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const auto& values = eig.eigenvalues();
  const double largest = values.maxCoeff();
  if (largest > 0.0 && values.minCoeff() > threshold * largest) return;
  const Eigen::VectorXd v = eig.eigenvectors().col(0);
  const double vmax = v.cwiseAbs().maxCoeff();
  std::ostringstream os;
  os << "basis Gram matrix is not positive definite; near-colinear components:";
  for (int k = 0; k < v.size(); ++k) {
    if (std::abs(v[k]) > 0.1 * vmax) os << ' ' << (k + 1);
  }
  throw ConfigError(os.str());
}

Eigen::VectorXd nnls_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs) {
  // Lawson-Hanson active set on the normal equations.
  const int K = static_cast<int>(rhs.size());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(K);
  std::vector<bool> passive(K, false);
  const double tol = 1e-14 * std::max(1.0, rhs.cwiseAbs().maxCoeff()) *
                     std::max(1.0, gram.cwiseAbs().maxCoeff());

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<int> idx;
    for (int k = 0; k < K; ++k) {
      if (passive[k]) idx.push_back(k);
    }
    z.setZero(K);
    if (idx.empty()) return;
    const int p = static_cast<int>(idx.size());
    Eigen::MatrixXd sub(p, p);
    Eigen::VectorXd b(p);
    for (int i = 0; i < p; ++i) {
      b[i] = rhs[idx[i]];
      for (int j = 0; j < p; ++j) sub(i, j) = gram(idx[i], idx[j]);
    }
    const Eigen::VectorXd sol = sub.ldlt().solve(b);
    for (int i = 0; i < p; ++i) z[idx[i]] = sol[i];
  };

  for (int outer = 0; outer < 10 * K + 10; ++outer) {
    const Eigen::VectorXd w = rhs - gram * x;
    int best = -1;
    double best_w = tol;
    for (int k = 0; k < K; ++k) {
      if (!passive[k] && w[k] > best_w) {
        best_w = w[k];
        best = k;
      }
    }
    if (best < 0) break;
    passive[best] = true;
    Eigen::VectorXd z;
    for (int inner = 0; inner < 10 * K + 10; ++inner) {
      solve_passive(z);
      bool feasible = true;
      for (int k = 0; k < K; ++k) {
        if (passive[k] && z[k] <= 0.0) feasible = false;
      }
      if (feasible) break;
      double step = 1.0;
      for (int k = 0; k < K; ++k) {
        if (passive[k] && z[k] <= 0.0) step = std::min(step, x[k] / (x[k] - z[k]));
      }
      x += step * (z - x);
      for (int k = 0; k < K; ++k) {
        if (passive[k] && x[k] <= 1e-300) {
          passive[k] = false;
          x[k] = 0.0;
        }
      }
    }
    x = z;
  }
  return x;
}

std::vector<double> project_phi(const std::function<double(const Noise&)>& target,
                                const BasisSet& basis, int t, const QuadratureGrid& grid) {
  const int K = basis.size();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd phi(K);
  for (const Noise& w : grid.nodes) {
    basis.evaluate(t, w, {phi.data(), std::size_t(K)});
    gram.noalias() += phi * phi.transpose();
    rhs += target(w) * phi;
  }
  const double scale = 1.0 / static_cast<double>(grid.nodes.size());
  gram *= scale;
  rhs *= scale;
  check_gram(gram);
  const Eigen::VectorXd theta = nnls_gram(gram, rhs);
  return {theta.data(), theta.data() + K};
}

BetaSchedule BetaSchedule::harmonic(int horizon, double numerator, double offset) {
  return {std::vector<double>(horizon, numerator), 1.0, offset};
}

double BetaSchedule::step(int t, std::int64_t n) const {
  const double x = offset + static_cast<double>(n);
  return power == 1.0 ? numerator[t] / x : numerator[t] / std::pow(x, power);
}

void BetaSchedule::validate(int horizon) const {
  if (static_cast<int>(numerator.size()) != horizon) {
    throw ConfigError("beta schedule: one numerator per stage is required");
  }
  for (double b : numerator) {
    if (!(b >= 0.0)) throw ConfigError("beta schedule: numerators must be nonnegative");
  }
  // Square-summable and divergent: power in (1/2, 1].
  if (!(power > 0.5 && power <= 1.0)) throw ConfigError("beta schedule: power must lie in (0.5, 1]");
  if (!(offset >= 0.0)) throw ConfigError("beta schedule: offset must be nonnegative");
}

RdsState initial_rds_state(const AdpProblem& problem, const RdsConfig& config,
                           std::span<const double> theta0) {
  if (!config.basis) throw ConfigError("risk-directed sampling requires a basis set");
  const int K = config.basis->size();
  if (!theta0.empty() && static_cast<int>(theta0.size()) != K) {
    throw ConfigError("initial sampling coefficients must have one entry per basis component");
  }
  RdsState state{initial_state(problem), MixtureCoefficients(problem.horizon(), problem.pairs(), K), 0};
  if (!theta0.empty()) {
    for (double v : theta0) {
      if (!(v >= 0.0)) throw ConfigError("initial sampling coefficients must be nonnegative");
    }
    for (int t = 0; t < problem.horizon(); ++t) {
      for (int p = 0; p < problem.pairs(); ++p) std::copy(theta0.begin(), theta0.end(), state.theta.row(t, p).begin());
    }
  }
  return state;
}

namespace {

class RdsSampler {
 public:
  RdsSampler(const RngStreams& rng, const RdsConfig& config, MixtureCoefficients& theta,
             std::int64_t cap_hits)
      : rng_(rng), config_(config), theta_(theta), cap_hits_(cap_hits) {}

  double sample(const AdpProblem& problem, const AdpState& state, std::int64_t n, int t, int s,
                int a, int pair, const double* u_old) {
    const BasisSet& basis = *config_.basis;
    auto row = theta_.row(t, pair);
    RngStream q_stream = rng_.stream(n, t, Purpose::q_sample);
    const Noise w = sample_mixture(row, basis, t, q_stream);

    const double pbar = mixture_pdf(row, basis, t, w);
    if (!(pbar > 0.0)) {
      throw SupportError("sampling mixture has zero density at a drawn point");
    }
    const double p_true = problem.model->noise().pdf(t, w);
    double ratio = p_true / pbar;
    if (ratio > config_.lr_cap) {
      ratio = config_.lr_cap;
      ++cap_hits_;
    }
    const double fc = future_cost(*problem.model, problem.space, state.q.slice(t + 1), t, s, a, w);
    const double h = problem.spec.combine(fc, u_old);
    update_coefficients(row, basis, t, w, std::abs(h), p_true, pbar, config_.beta.step(t, n));
    return ratio * h;
  }

  std::int64_t cap_hits() const { return cap_hits_; }

 private:
  const RngStreams& rng_;
  const RdsConfig& config_;
  MixtureCoefficients& theta_;
  std::int64_t cap_hits_;
};

}  // namespace

RdsState run_with_rds(const AdpProblem& problem, const RdsConfig& config, RdsState state,
                      std::int64_t iterations, const RngStreams& rng, const RunOptions& options) {
  if (!config.basis) throw ConfigError("risk-directed sampling requires a basis set");
  config.beta.validate(problem.horizon());
  if (config.basis->dim() != problem.model->noise().dim()) {
    throw ConfigError("basis dimension does not match the noise dimension");
  }
  if (state.theta.horizon() != problem.horizon() || state.theta.pairs() != problem.pairs() ||
      state.theta.components() != config.basis->size()) {
    throw std::invalid_argument("run_with_rds: coefficient table shape does not match");
  }
  if (!(config.lr_cap > 0.0)) throw ConfigError("likelihood-ratio cap must be positive");
  RdsSampler sampler(rng, config, state.theta, state.lr_cap_hits);
  state.adp = detail::run_loop(problem, std::move(state.adp), iterations, rng, options, sampler);
  state.lr_cap_hits = sampler.cap_hits();
  return state;
}

}  // namespace dqbrm
