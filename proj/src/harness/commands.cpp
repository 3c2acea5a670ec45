#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>

#include "dqbrm/errors.hpp"
#include "dqbrm/harness.hpp"

namespace dqbrm {

namespace fs = std::filesystem;
using nlohmann::json;

void apply_overrides(ExperimentConfig& config, const CliOverrides& o) {
  if (o.seeds) config.seeds = *o.seeds;
  if (o.seed) config.seeds = {*o.seed};
  if (o.out) config.output = *o.out;
  if (o.model && *o.model != config.model.name) {
    config.model.name = *o.model;
    config.model.overrides = json::object();
  }
  if (o.iters) config.solver.iterations = *o.iters;
  if (o.rds) config.rds.enabled = *o.rds;
  config.validate();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void prepare_output(const ExperimentConfig& config, std::initializer_list<const char*> subdirs) {
  fs::create_directories(config.output);
  for (const char* sub : subdirs) fs::create_directories(fs::path(config.output) / sub);
  write_text(fs::path(config.output) / "config.json", config.to_json().dump(2) + "\n");
}

std::vector<WatchedPair> watched_pairs(const ExperimentConfig& config) {
  std::vector<WatchedPair> out;
  for (const auto& w : config.trace.watched) out.push_back({w.t, w.pair});
  return out;
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int initial_state_of(const ExperimentConfig& config, const ModelEntry& entry) {
  const int s0 = config.benchmark.initial_state.value_or(entry.initial_state);
  if (s0 < 0 || s0 >= entry.model->num_states()) {
    throw ConfigError("invalid field 'benchmark.initial_state': outside the state space");
  }
  return s0;
}

ScenarioSet make_scenarios(const ExperimentConfig& config, const MdpModel& model) {
  const auto& b = config.benchmark;
  if (b.scenario_file.empty()) {
    return ScenarioSet::sample(model.noise(), model.horizon(), b.scenarios, RngStreams(b.scenario_seed));
  }
  const fs::path path(b.scenario_file);
  if (!fs::exists(path)) throw ConfigError("cannot open scenario file " + path.string());
  ScenarioSet set = path.extension() == ".bin" ? ScenarioSet::load_binary(path) : ScenarioSet::load_csv(path);
  if (set.horizon() != model.horizon() || set.dim() != model.noise().dim()) {
    throw ConfigError("scenario file " + path.string() + " does not match model '" + model.name() + "'");
  }
  return set;
}

struct SeedResult {
  std::uint64_t seed = 0;
  std::int64_t iterations = 0;
  std::optional<double> err_inf, err_l2;
  std::int64_t cap_hits = 0;
  double runtime = 0.0;
};

// One replication: runs the configured variant and fills `trace`. Returns the final tables.
struct Replication {
  AdpState adp;
  std::int64_t cap_hits = 0;
};

Replication replicate(const AdpProblem& problem, const std::optional<RdsConfig>& rds,
                      const std::vector<double>& theta0, std::int64_t iterations, std::uint64_t seed,
                      RunOptions options) {
  RngStreams rng(seed);
  if (rds) {
    RdsState state = run_with_rds(problem, *rds, initial_rds_state(problem, *rds, theta0), iterations, rng, options);
    return {std::move(state.adp), state.lr_cap_hits};
  }
  return {run(problem, initial_state(problem), iterations, rng, options), 0};
}

}  // namespace

void cmd_run(const ExperimentConfig& config, std::ostream& log) {
  const ModelEntry entry = make_model(config.model);
  const QbrmSpec spec = make_spec(config.risk);
  const AdpProblem problem = make_problem(config, entry, spec);
  std::optional<RdsConfig> rds;
  if (config.rds.enabled) rds = make_rds(config, entry);
  std::shared_ptr<const ValueTable> reference;
  if (!config.trace.reference.empty()) {
    reference = std::make_shared<const ValueTable>(read_tables(config.trace.reference, *entry.model).q);
  }
  prepare_output(config, {"traces", "tables"});
  const fs::path out(config.output);
  const auto watched = watched_pairs(config);

  std::vector<SeedResult> results(config.seeds.size());
  parallel_for(static_cast<int>(config.seeds.size()), config.threads, [&](int k) {
    const std::uint64_t seed = config.seeds[k];
    const auto start = std::chrono::steady_clock::now();
    std::ostringstream trace;
    TraceWriter writer(trace, static_cast<int>(spec.num_levels()), watched, reference != nullptr,
                       config.trace.wall_clock);
    RunOptions options;
    options.trace_every = config.trace.every;
    options.watched = watched;
    options.reference = reference;
    options.trace_sink = [&](const TraceRecord& r) { writer.write(r); };
    Replication rep = replicate(problem, rds, config.rds.theta0, config.solver.iterations, seed, options);
    write_text(out / "traces" / (std::to_string(seed) + ".csv"), trace.str());
    write_tables(out / "tables" / (std::to_string(seed) + ".csv"), *entry.model, rep.adp.q, &rep.adp.u);
    SeedResult& r = results[k];
    r.seed = seed;
    r.iterations = rep.adp.iteration;
    r.cap_hits = rep.cap_hits;
    if (reference) {
      r.err_inf = max_abs_error(rep.adp.q, *reference);
      r.err_l2 = std::sqrt(squared_l2_error(rep.adp.q, *reference));
    }
    r.runtime = elapsed(start);
  });

  json seeds = json::array();
  for (const auto& r : results) {
    json j = {{"seed", r.seed}, {"iterations", r.iterations}, {"lr_cap_hits", r.cap_hits},
              {"runtime_seconds", r.runtime}};
    if (r.err_inf) j["final_err_inf"] = *r.err_inf;
    if (r.err_l2) j["final_err_l2"] = *r.err_l2;
    seeds.push_back(j);
    log << "seed " << r.seed << ": " << r.iterations << " iterations";
    if (r.err_inf) log << ", max error " << format_number(*r.err_inf);
    log << "\n";
  }
  json summary = {{"schema", "dqbrm.summary/1"}, {"command", "run"}, {"model", entry.model->name()},
                  {"risk", spec.name()}, {"pairs", problem.pairs()}, {"rds", config.rds.enabled},
                  {"seeds", seeds}, {"config", config.to_json()}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
}

void cmd_benchmark(const ExperimentConfig& config, std::ostream& log) {
  const ModelEntry entry = make_model(config.model);
  const MdpModel& model = *entry.model;
  const QbrmSpec spec = make_spec(config.risk);
  const int s0 = initial_state_of(config, entry);
  std::vector<std::pair<std::string, PolicyTable>> supplied;
  const StateActionSpace space(model);
  for (const auto& p : config.benchmark.policies) {
    supplied.emplace_back(p.name, extract_policy(read_tables(p.tables, model).q, space));
  }
  const ScenarioSet scenarios = make_scenarios(config, model);
  prepare_output(config, {});
  const fs::path out(config.output);

  const SaaSolution opt = saa_optimal(model, spec, scenarios);
  const double v_star = opt.value.at(0, s0);
  const double v_myopic = evaluate_policy(model, spec, myopic_policy(model, spec, scenarios), scenarios).at(0, s0);
  write_tables(out / "reference.csv", model, opt.q, nullptr);

  const std::string lambda = config.risk.combiner == "mean_cvar" ? format_number(config.risk.lambda) : "";
  std::ostringstream csv;
  csv << "#schema=" << kBenchmarkSchema << "\n";
  csv << "policy,lambda,V0,pct_optimality\n";
  json rows = json::array();
  auto row = [&](const std::string& name, double v0) {
    const double pct = percent_optimality(v0, v_myopic, v_star);
    csv << name << ',' << lambda << ',' << format_number(v0) << ',' << format_number(pct) << "\n";
    rows.push_back({{"policy", name}, {"V0", v0}, {"pct_optimality", pct}});
    log << name << ": V0 " << format_number(v0) << ", " << format_number(100.0 * pct) << "% optimal\n";
  };
  row("optimal", v_star);
  row("myopic", v_myopic);
  for (const auto& [name, policy] : supplied) row(name, evaluate_policy(model, spec, policy, scenarios).at(0, s0));
  write_text(out / "benchmark.csv", csv.str());

  json summary = {{"schema", "dqbrm.summary/1"}, {"command", "benchmark"}, {"model", model.name()},
                  {"risk", spec.name()}, {"initial_state", s0}, {"scenarios", scenarios.count(0)},
                  {"rows", rows}, {"config", config.to_json()}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
}

void cmd_compare_rds(const ExperimentConfig& config, std::ostream& log) {
  if (config.seeds.size() < 2) throw ConfigError("invalid field 'seeds': compare-rds needs at least two seeds");
  if (config.risk.combiner != "mean_cvar") {
    throw ConfigError("invalid field 'risk.combiner': compare-rds sweeps lambda and needs mean_cvar");
  }
  const ModelEntry entry = make_model(config.model);
  const MdpModel& model = *entry.model;
  const int s0 = initial_state_of(config, entry);
  const RdsConfig rds = make_rds(config, entry);
  const ScenarioSet scenarios = make_scenarios(config, model);
  const auto& lambdas = config.compare.lambdas;
  const auto& checkpoints = config.compare.checkpoints;
  const std::int64_t budget = checkpoints.back();

  struct Anchor {
    double v_star, v_myopic;
  };
  std::vector<Anchor> anchors(lambdas.size());
  std::vector<AdpProblem> problems;
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    RiskConfig risk = config.risk;
    risk.lambda = lambdas[l];
    const QbrmSpec spec = make_spec(risk);
    problems.push_back(make_problem(config, entry, spec));
  }
  prepare_output(config, {"traces"});
  const fs::path out(config.output);
  parallel_for(static_cast<int>(lambdas.size()), config.threads, [&](int l) {
    const QbrmSpec& spec = problems[l].spec;
    anchors[l].v_star = saa_optimal(model, spec, scenarios).value.at(0, s0);
    anchors[l].v_myopic = evaluate_policy(model, spec, myopic_policy(model, spec, scenarios), scenarios).at(0, s0);
  });

  const std::size_t S = config.seeds.size();
  const std::size_t C = checkpoints.size();
  // [lambda][variant][seed][checkpoint] -> (V0, pct)
  std::vector<std::pair<double, double>> cells(lambdas.size() * 2 * S * C);
  auto cell = [&](std::size_t l, int v, std::size_t s, std::size_t c) -> auto& {
    return cells[((l * 2 + v) * S + s) * C + c];
  };
  const char* variants[2] = {"plain", "rds"};
  const auto watched = watched_pairs(config);
  const int tasks = static_cast<int>(lambdas.size() * 2 * S);
  parallel_for(tasks, config.threads, [&](int task) {
    const std::size_t l = task / (2 * S);
    const int v = (task / static_cast<int>(S)) % 2;
    const std::size_t s = task % S;
    const AdpProblem& problem = problems[l];
    const StateActionSpace& space = problem.space;
    std::ostringstream trace;
    TraceWriter writer(trace, static_cast<int>(problem.spec.num_levels()), watched, false, config.trace.wall_clock);
    RunOptions options;
    options.trace_every = config.trace.every;
    options.watched = watched;
    options.trace_sink = [&](const TraceRecord& r) { writer.write(r); };
    options.checkpoints = checkpoints;
    std::size_t c = 0;
    options.on_checkpoint = [&](std::int64_t, const AdpState& state) {
      const PolicyTable policy = extract_policy(state.q, space);
      const double v0 = evaluate_policy(model, problem.spec, policy, scenarios).at(0, s0);
      cell(l, v, s, c++) = {v0, percent_optimality(v0, anchors[l].v_myopic, anchors[l].v_star)};
    };
    replicate(problem, v == 1 ? std::optional<RdsConfig>(rds) : std::nullopt, config.rds.theta0, budget,
              config.seeds[s], options);
    write_text(out / "traces" /
                   (std::string(variants[v]) + "-lambda" + format_number(lambdas[l]) + "-" +
                    std::to_string(config.seeds[s]) + ".csv"),
               trace.str());
  });

  std::ostringstream runs, summary_csv;
  runs << "#schema=" << kCompareSchema << "\n" << "variant,lambda,seed,n,V0,pct_optimality\n";
  summary_csv << "#schema=" << kCompareSchema << "\n" << "variant,lambda,n,seeds,mean_pct,sd_pct\n";
  json rows = json::array();
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    for (int v = 0; v < 2; ++v) {
      for (std::size_t c = 0; c < C; ++c) {
        double sum = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
          const auto [v0, pct] = cell(l, v, s, c);
          runs << variants[v] << ',' << format_number(lambdas[l]) << ',' << config.seeds[s] << ','
               << checkpoints[c] << ',' << format_number(v0) << ',' << format_number(pct) << "\n";
          sum += pct;
        }
        const double mean = sum / S;
        double ss = 0.0;
        for (std::size_t s = 0; s < S; ++s) ss += std::pow(cell(l, v, s, c).second - mean, 2);
        const double sd = std::sqrt(ss / (S - 1));
        summary_csv << variants[v] << ',' << format_number(lambdas[l]) << ',' << checkpoints[c] << ',' << S << ','
                    << format_number(mean) << ',' << format_number(sd) << "\n";
        rows.push_back({{"variant", variants[v]}, {"lambda", lambdas[l]}, {"n", checkpoints[c]}, {"mean_pct", mean},
                        {"sd_pct", sd}});
        log << variants[v] << " lambda=" << format_number(lambdas[l]) << " n=" << checkpoints[c]
            << ": mean pct " << format_number(mean) << "\n";
      }
    }
  }
  write_text(out / "compare.csv", runs.str());
  write_text(out / "compare_summary.csv", summary_csv.str());
  json anchor_rows = json::array();
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    anchor_rows.push_back({{"lambda", lambdas[l]}, {"V0_optimal", anchors[l].v_star}, {"V0_myopic", anchors[l].v_myopic}});
  }
  json summary = {{"schema", "dqbrm.summary/1"}, {"command", "compare-rds"}, {"model", model.name()},
                  {"initial_state", s0}, {"anchors", anchor_rows}, {"rows", rows}, {"config", config.to_json()}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
}

void cmd_export_density(const ExperimentConfig& config, std::ostream& log) {
  const ModelEntry entry = make_model(config.model);
  const MdpModel& model = *entry.model;
  const QbrmSpec spec = make_spec(config.risk);
  const AdpProblem problem = make_problem(config, entry, spec);
  const RdsConfig rds = make_rds(config, entry);
  const auto& d = config.density;
  if (d.t < 0 || d.t >= model.horizon()) throw ConfigError("invalid field 'density.t': outside 0..T-1");
  if (d.state < 0 || d.state >= model.num_states()) throw ConfigError("invalid field 'density.state': outside the state space");
  const int pair = d.action >= 0 && d.action < model.num_actions() ? problem.space.index(d.state, d.action) : -1;
  if (pair < 0) throw ConfigError("invalid field 'density.action': not feasible in the chosen state");
  const BasisSet& basis = *rds.basis;
  const int dim = basis.dim();
  std::vector<int> points = d.points;
  if (points.size() == 1) points.assign(dim, points[0]);
  if (static_cast<int>(points.size()) != dim) throw ConfigError("invalid field 'density.points': needs 1 or dim entries");

  const std::uint64_t seed = config.seeds.front();
  RdsState state = run_with_rds(problem, rds, initial_rds_state(problem, rds, config.rds.theta0),
                                config.solver.iterations, RngStreams(seed));
  prepare_output(config, {});
  const fs::path out(config.output);

  const ReferenceBox& box = basis.reference_box();
  const auto theta = state.theta.row(d.t, pair);
  std::ostringstream csv;
  csv << "#schema=" << kDensitySchema << "\n" << "t,pair";
  for (int k = 0; k < dim; ++k) csv << ",w" << k;
  csv << ",mixture_pdf,true_pdf\n";
  std::vector<int> idx(dim, 0);
  const std::int64_t total = std::accumulate(points.begin(), points.end(), std::int64_t{1}, std::multiplies<>());
  for (std::int64_t cnt = 0; cnt < total; ++cnt) {
    Noise w{};
    for (int k = 0; k < dim; ++k) w[k] = box.lo[k] + (idx[k] + 0.5) * (box.hi[k] - box.lo[k]) / points[k];
    csv << d.t << ',' << pair;
    for (int k = 0; k < dim; ++k) csv << ',' << format_number(w[k]);
    csv << ',' << format_number(mixture_pdf(theta, basis, d.t, w)) << ',' << format_number(model.noise().pdf(d.t, w))
        << "\n";
    for (int k = dim - 1; k >= 0; --k) {  // last axis fastest
      if (++idx[k] < points[k]) break;
      idx[k] = 0;
    }
  }
  write_text(out / "density.csv", csv.str());

  std::ostringstream th;
  th << "#schema=" << kDensitySchema << "\n" << "t,pair";
  for (int k = 0; k < basis.size(); ++k) th << ",theta" << k;
  th << "\n";
  for (int t = 0; t < model.horizon(); ++t) {
    for (int p = 0; p < problem.pairs(); ++p) {
      th << t << ',' << p;
      for (double v : state.theta.row(t, p)) th << ',' << format_number(v);
      th << "\n";
    }
  }
  write_text(out / "theta.csv", th.str());

  json components = json::array();
  for (int k = 0; k < basis.size(); ++k) components.push_back(basis.component(k).describe());
  json summary = {{"schema", "dqbrm.summary/1"}, {"command", "export-density"}, {"model", model.name()},
                  {"seed", seed}, {"t", d.t}, {"pair", pair}, {"points", points},
                  {"box", {{"lo", box.lo}, {"hi", box.hi}}}, {"components", components},
                  {"theta", std::vector<double>(theta.begin(), theta.end())},
                  {"lr_cap_hits", state.lr_cap_hits}, {"config", config.to_json()}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  log << "density grid of " << total << " points written for t=" << d.t << ", pair " << pair << "\n";
}

int dispatch(const std::string& command, const ExperimentConfig& config, std::ostream& log, std::ostream& err) {
  try {
    if (command == "run") {
      cmd_run(config, log);
    } else if (command == "benchmark") {
      cmd_benchmark(config, log);
    } else if (command == "compare-rds") {
      cmd_compare_rds(config, log);
    } else if (command == "export-density") {
      cmd_export_density(config, log);
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace dqbrm
