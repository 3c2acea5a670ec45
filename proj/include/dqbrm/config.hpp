#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace dqbrm {

inline constexpr const char* kConfigSchema = "dqbrm.config/1";

struct ModelConfig {
  std::string name = "testbed";
  nlohmann::json overrides = nlohmann::json::object();
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct RiskConfig {
  std::string combiner = "mean_cvar";  // var | cvar | mean_cvar | affine
  std::vector<double> alphas{0.9};
  double lambda = 0.5;
  double mean_weight = 0.0;
  std::vector<double> var_weights;
  std::vector<double> cvar_weights;
  std::optional<double> lipschitz;
  friend bool operator==(const RiskConfig&, const RiskConfig&) = default;
};

struct SolverConfig {
  std::int64_t iterations = 100000;
  // Probability epsilon * d of exploring uniformly over all pairs.
  double exploration = 1.0;
  // One value broadcast to every stage, or one per stage.
  std::vector<double> gamma{1.0};
  std::vector<double> eta{1.0};
  double gamma_offset = 0.0;
  double eta_offset = 0.0;
  // Per-stage cost bound used for the projection boxes; the model default when absent.
  std::optional<double> stage_cost_bound;
  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct GaussianSpec {
  std::vector<double> mean;
  std::vector<double> sd;
  friend bool operator==(const GaussianSpec&, const GaussianSpec&) = default;
};

struct RdsSettings {
  bool enabled = false;
  std::vector<double> beta{1.0};
  double beta_power = 1.0;
  double beta_offset = 0.0;
  double lr_cap = 1e6;
  std::vector<double> theta0;
  // Empty means the model's default basis.
  std::vector<GaussianSpec> basis;
  bool basis_true_law = true;
  friend bool operator==(const RdsSettings&, const RdsSettings&) = default;
};

struct PolicySource {
  std::string name;
  std::string tables;
  friend bool operator==(const PolicySource&, const PolicySource&) = default;
};

struct BenchmarkSettings {
  int scenarios = 5000;
  std::uint64_t scenario_seed = 20240501;
  std::string scenario_file;  // load instead of sampling when set
  std::optional<int> initial_state;
  std::vector<PolicySource> policies;
  friend bool operator==(const BenchmarkSettings&, const BenchmarkSettings&) = default;
};

struct CompareSettings {
  std::vector<double> lambdas{0.5};
  std::vector<std::int64_t> checkpoints{100000};
  friend bool operator==(const CompareSettings&, const CompareSettings&) = default;
};

struct DensitySettings {
  int t = 0;
  int state = 0;
  int action = 0;
  std::vector<int> points{60, 60};
  friend bool operator==(const DensitySettings&, const DensitySettings&) = default;
};

struct WatchSpec {
  int t = 0;
  int pair = 0;
  friend bool operator==(const WatchSpec&, const WatchSpec&) = default;
};

struct TraceSettings {
  std::int64_t every = 0;
  std::vector<WatchSpec> watched;
  std::string reference;  // tables CSV with reference Q-factors
  bool wall_clock = false;
  friend bool operator==(const TraceSettings&, const TraceSettings&) = default;
};

struct ExperimentConfig {
  ModelConfig model;
  RiskConfig risk;
  SolverConfig solver;
  RdsSettings rds;
  BenchmarkSettings benchmark;
  CompareSettings compare;
  DensitySettings density;
  TraceSettings trace;
  std::vector<std::uint64_t> seeds{1};
  std::string output = "out";
  int threads = 0;  // 0 selects the hardware concurrency

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  // Structural checks that need no model; throws ConfigError naming the field.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace dqbrm
