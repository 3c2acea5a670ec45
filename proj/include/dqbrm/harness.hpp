#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dqbrm/adp.hpp"
#include "dqbrm/config.hpp"
#include "dqbrm/rds.hpp"
#include "dqbrm/saa.hpp"

namespace dqbrm {

inline constexpr const char* kTraceSchema = "dqbrm.trace/1";
inline constexpr const char* kTablesSchema = "dqbrm.tables/1";
inline constexpr const char* kBenchmarkSchema = "dqbrm.benchmark/1";
inline constexpr const char* kCompareSchema = "dqbrm.compare/1";
inline constexpr const char* kDensitySchema = "dqbrm.density/1";

struct ModelEntry {
  std::shared_ptr<const MdpModel> model;
  double stage_cost_bound = 1.0;
  int initial_state = 0;
  std::shared_ptr<const BasisSet> basis;
};

// Registered names: energy, energy-small, testbed, toy-chain, rds-1d.
std::vector<std::string> model_names();
ModelEntry make_model(const ModelConfig& config);

QbrmSpec make_spec(const RiskConfig& risk);
AdpProblem make_problem(const ExperimentConfig& config, const ModelEntry& entry, const QbrmSpec& spec);
// Basis from the config, or the model default; the Gram matrix is checked at t = 0.
RdsConfig make_rds(const ExperimentConfig& config, const ModelEntry& entry);

// Shortest round-trip decimal text of x.
std::string format_number(double x);

// Columns: t,pair,state,action,q,u0..u{m-1}; terminal slice omitted.
void write_tables(const std::filesystem::path& path, const MdpModel& model, const ValueTable& q,
                  const AuxQuantileTable* u);
struct LoadedTables {
  ValueTable q;
  std::optional<AuxQuantileTable> u;  // absent when the file has no u columns
};
// Throws ConfigError when the file is missing or its shape disagrees with the model.
LoadedTables read_tables(const std::filesystem::path& path, const MdpModel& model);

/// CSV writer for ExperimentTrace records.
class TraceWriter {
 public:
  TraceWriter(std::ostream& out, int levels, const std::vector<WatchedPair>& watched,
              bool has_reference, bool wall_clock);
  void write(const TraceRecord& record);

 private:
  std::ostream& out_;
  bool has_reference_;
  bool wall_clock_;
  double start_;
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::string> out;
  std::optional<std::string> model;
  std::optional<std::int64_t> iters;
  std::optional<bool> rds;
};
void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides);

// Each command writes into config.output and throws on failure.
void cmd_run(const ExperimentConfig& config, std::ostream& log);
void cmd_benchmark(const ExperimentConfig& config, std::ostream& log);
void cmd_compare_rds(const ExperimentConfig& config, std::ostream& log);
void cmd_export_density(const ExperimentConfig& config, std::ostream& log);

// Runs a command and maps failures to exit codes: 1 config error, 2 runtime error.
int dispatch(const std::string& command, const ExperimentConfig& config, std::ostream& log,
             std::ostream& err);

// fn(i) for i in [0, n) on up to `threads` workers; the first exception is rethrown.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace dqbrm
