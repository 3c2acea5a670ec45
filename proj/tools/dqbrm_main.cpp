#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dqbrm/errors.hpp"
#include "dqbrm/harness.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw dqbrm::ConfigError("invalid --seeds entry '" + item + "'");
    }
    seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw dqbrm::ConfigError("--seeds needs at least one seed");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-averse finite-horizon MDP solver with dynamic quantile-based risk measures"};
  app.require_subcommand(1, 1);

  std::string config_path, seeds_text, rds_flag;
  std::uint64_t seed = 0;
  std::string out, model;
  std::int64_t iters = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"run", "Train Q-factor tables, one replication per seed"},
      {"benchmark", "SAA optimal, myopic and supplied policies on a common scenario set"},
      {"compare-rds", "Paired runs with and without risk-directed sampling"},
      {"export-density", "Gridded sampling density for one state-action pair"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Experiment config (JSON)");
    sub->add_option("--seed", seed, "Single seed, replaces the config seed list");
    sub->add_option("--seeds", seeds_text, "Comma-separated seed list");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--model", model, "Registered model name");
    sub->add_option("--iters", iters, "Iterations per run");
    sub->add_option("--rds", rds_flag, "Risk-directed sampling")->check(CLI::IsMember({"on", "off"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  CLI::App* sub = app.get_subcommands().front();

  dqbrm::ExperimentConfig config;
  try {
    if (!config_path.empty()) config = dqbrm::load_config(config_path);
    dqbrm::CliOverrides o;
    if (sub->count("--seed")) o.seed = seed;
    if (sub->count("--seeds")) o.seeds = parse_seed_list(seeds_text);
    if (sub->count("--out")) o.out = out;
    if (sub->count("--model")) o.model = model;
    if (sub->count("--iters")) {
      if (iters < 0) throw dqbrm::ConfigError("invalid field 'solver.iterations': must be nonnegative");
      o.iters = iters;
    }
    if (sub->count("--rds")) o.rds = rds_flag == "on";
    dqbrm::apply_overrides(config, o);
  } catch (const dqbrm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  return dqbrm::dispatch(sub->get_name(), config, std::cout, std::cerr);
}
