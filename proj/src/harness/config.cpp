#include "dqbrm/config.hpp"

#include <fstream>
#include <set>

#include "dqbrm/errors.hpp"

namespace dqbrm {

using nlohmann::json;

namespace {

// Reads fields from one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + " must be an object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown field " + where(item.key()));
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("field " + where(key) + " has the wrong type");
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    T value{};
    get(key, value);
    out = value;
  }

  // A number is accepted as a one-element list.
  void get_list(const char* key, std::vector<double>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    if (it->is_number()) {
      out = {it->get<double>()};
      return;
    }
    get(key, out);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "config" : "'" + path_ + "'";
    return "'" + (path_.empty() ? key : path_ + "." + key) + "'";
  }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("invalid field '" + field + "': " + what);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  Fields root(j, "");
  std::string schema = kConfigSchema;
  root.get("schema", schema);
  if (schema != kConfigSchema) {
    throw ConfigError("unsupported config schema '" + schema + "' (expected " + kConfigSchema + ")");
  }
  if (const json* m = root.child("model")) {
    if (m->is_string()) {
      c.model.name = m->get<std::string>();
    } else {
      Fields f(*m, "model");
      f.get("name", c.model.name);
      if (const json* o = f.child("overrides")) {
        if (!o->is_object()) throw ConfigError("field 'model.overrides' must be an object");
        c.model.overrides = *o;
      }
    }
  }
  if (const json* r = root.child("risk")) {
    Fields f(*r, "risk");
    f.get("combiner", c.risk.combiner);
    f.get_list("alphas", c.risk.alphas);
    f.get_list("alpha", c.risk.alphas);
    f.get("lambda", c.risk.lambda);
    f.get("mean_weight", c.risk.mean_weight);
    f.get_list("var_weights", c.risk.var_weights);
    f.get_list("cvar_weights", c.risk.cvar_weights);
    f.get("lipschitz", c.risk.lipschitz);
  }
  if (const json* s = root.child("solver")) {
    Fields f(*s, "solver");
    f.get("iterations", c.solver.iterations);
    f.get("exploration", c.solver.exploration);
    f.get_list("gamma", c.solver.gamma);
    f.get_list("eta", c.solver.eta);
    f.get("gamma_offset", c.solver.gamma_offset);
    f.get("eta_offset", c.solver.eta_offset);
    f.get("stage_cost_bound", c.solver.stage_cost_bound);
  }
  if (const json* r = root.child("rds")) {
    Fields f(*r, "rds");
    f.get("enabled", c.rds.enabled);
    f.get_list("beta", c.rds.beta);
    f.get("beta_power", c.rds.beta_power);
    f.get("beta_offset", c.rds.beta_offset);
    f.get("lr_cap", c.rds.lr_cap);
    f.get_list("theta0", c.rds.theta0);
    f.get("basis_true_law", c.rds.basis_true_law);
    if (const json* b = f.child("basis")) {
      if (!b->is_array()) throw ConfigError("field 'rds.basis' must be a list");
      for (std::size_t k = 0; k < b->size(); ++k) {
        Fields g((*b)[k], "rds.basis[" + std::to_string(k) + "]");
        GaussianSpec spec;
        g.get_list("mean", spec.mean);
        g.get_list("sd", spec.sd);
        c.rds.basis.push_back(std::move(spec));
      }
    }
  }
  if (const json* b = root.child("benchmark")) {
    Fields f(*b, "benchmark");
    f.get("scenarios", c.benchmark.scenarios);
    f.get("scenario_seed", c.benchmark.scenario_seed);
    f.get("scenario_file", c.benchmark.scenario_file);
    f.get("initial_state", c.benchmark.initial_state);
    if (const json* p = f.child("policies")) {
      if (!p->is_array()) throw ConfigError("field 'benchmark.policies' must be a list");
      for (std::size_t k = 0; k < p->size(); ++k) {
        Fields g((*p)[k], "benchmark.policies[" + std::to_string(k) + "]");
        PolicySource src;
        g.get("name", src.name);
        g.get("tables", src.tables);
        c.benchmark.policies.push_back(std::move(src));
      }
    }
  }
  if (const json* cmp = root.child("compare")) {
    Fields f(*cmp, "compare");
    f.get_list("lambdas", c.compare.lambdas);
    f.get("checkpoints", c.compare.checkpoints);
  }
  if (const json* d = root.child("density")) {
    Fields f(*d, "density");
    f.get("t", c.density.t);
    f.get("state", c.density.state);
    f.get("action", c.density.action);
    f.get("points", c.density.points);
  }
  if (const json* t = root.child("trace")) {
    Fields f(*t, "trace");
    f.get("every", c.trace.every);
    f.get("reference", c.trace.reference);
    f.get("wall_clock", c.trace.wall_clock);
    if (const json* w = f.child("watched")) {
      if (!w->is_array()) throw ConfigError("field 'trace.watched' must be a list");
      for (std::size_t k = 0; k < w->size(); ++k) {
        Fields g((*w)[k], "trace.watched[" + std::to_string(k) + "]");
        WatchSpec spec;
        g.get("t", spec.t);
        g.get("pair", spec.pair);
        c.trace.watched.push_back(spec);
      }
    }
  }
  root.get("seeds", c.seeds);
  root.get("output", c.output);
  root.get("threads", c.threads);
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  j["schema"] = kConfigSchema;
  j["model"] = {{"name", model.name}, {"overrides", model.overrides}};
  json r = {{"combiner", risk.combiner}, {"alphas", risk.alphas}, {"lambda", risk.lambda},
            {"mean_weight", risk.mean_weight}, {"var_weights", risk.var_weights},
            {"cvar_weights", risk.cvar_weights}};
  r["lipschitz"] = risk.lipschitz ? json(*risk.lipschitz) : json(nullptr);
  j["risk"] = r;
  json s = {{"iterations", solver.iterations}, {"exploration", solver.exploration},
            {"gamma", solver.gamma}, {"eta", solver.eta}, {"gamma_offset", solver.gamma_offset},
            {"eta_offset", solver.eta_offset}};
  s["stage_cost_bound"] = solver.stage_cost_bound ? json(*solver.stage_cost_bound) : json(nullptr);
  j["solver"] = s;
  json basis = json::array();
  for (const auto& g : rds.basis) basis.push_back({{"mean", g.mean}, {"sd", g.sd}});
  j["rds"] = {{"enabled", rds.enabled}, {"beta", rds.beta}, {"beta_power", rds.beta_power},
              {"beta_offset", rds.beta_offset}, {"lr_cap", rds.lr_cap}, {"theta0", rds.theta0},
              {"basis", basis}, {"basis_true_law", rds.basis_true_law}};
  json policies = json::array();
  for (const auto& p : benchmark.policies) policies.push_back({{"name", p.name}, {"tables", p.tables}});
  json b = {{"scenarios", benchmark.scenarios}, {"scenario_seed", benchmark.scenario_seed},
            {"scenario_file", benchmark.scenario_file}, {"policies", policies}};
  b["initial_state"] = benchmark.initial_state ? json(*benchmark.initial_state) : json(nullptr);
  j["benchmark"] = b;
  j["compare"] = {{"lambdas", compare.lambdas}, {"checkpoints", compare.checkpoints}};
  j["density"] = {{"t", density.t}, {"state", density.state}, {"action", density.action},
                  {"points", density.points}};
  json watched = json::array();
  for (const auto& w : trace.watched) watched.push_back({{"t", w.t}, {"pair", w.pair}});
  j["trace"] = {{"every", trace.every}, {"watched", watched}, {"reference", trace.reference},
                {"wall_clock", trace.wall_clock}};
  j["seeds"] = seeds;
  j["output"] = output;
  j["threads"] = threads;
  return j;
}

void ExperimentConfig::validate() const {
  require(!model.name.empty(), "model.name", "must not be empty");
  const std::set<std::string> combiners{"var", "cvar", "mean_cvar", "affine"};
  require(combiners.count(risk.combiner) == 1, "risk.combiner", "must be var, cvar, mean_cvar or affine");
  require(!risk.alphas.empty(), "risk.alphas", "needs at least one level");
  for (std::size_t i = 0; i < risk.alphas.size(); ++i) {
    require(risk.alphas[i] > 0.0 && risk.alphas[i] < 1.0, "risk.alphas", "levels must lie in (0, 1)");
    require(i == 0 || risk.alphas[i] > risk.alphas[i - 1], "risk.alphas", "levels must be strictly increasing");
  }
  require(risk.lambda >= 0.0 && risk.lambda <= 1.0, "risk.lambda", "must lie in [0, 1]");
  require(!risk.lipschitz || *risk.lipschitz > 0.0, "risk.lipschitz", "must be positive");
  require(solver.iterations >= 0, "solver.iterations", "must be nonnegative");
  require(solver.exploration >= 0.0 && solver.exploration <= 1.0, "solver.exploration", "must lie in [0, 1]");
  require(!solver.gamma.empty(), "solver.gamma", "must not be empty");
  require(!solver.eta.empty(), "solver.eta", "must not be empty");
  for (double g : solver.gamma) require(g > 0.0, "solver.gamma", "must be positive");
  for (double e : solver.eta) require(e > 0.0, "solver.eta", "must be positive");
  require(solver.gamma_offset >= 0.0, "solver.gamma_offset", "must be nonnegative");
  require(solver.eta_offset >= 0.0, "solver.eta_offset", "must be nonnegative");
  require(!solver.stage_cost_bound || *solver.stage_cost_bound > 0.0, "solver.stage_cost_bound", "must be positive");
  require(!rds.beta.empty(), "rds.beta", "must not be empty");
  for (double b : rds.beta) require(b >= 0.0, "rds.beta", "must be nonnegative");
  require(rds.beta_power > 0.5 && rds.beta_power <= 1.0, "rds.beta_power", "must lie in (0.5, 1]");
  require(rds.beta_offset >= 0.0, "rds.beta_offset", "must be nonnegative");
  require(rds.lr_cap > 0.0, "rds.lr_cap", "must be positive");
  for (double v : rds.theta0) require(v >= 0.0, "rds.theta0", "must be nonnegative");
  for (const auto& g : rds.basis) {
    require(!g.mean.empty() && g.mean.size() == g.sd.size(), "rds.basis", "mean and sd must have equal nonzero length");
    for (double sd : g.sd) require(sd > 0.0, "rds.basis", "standard deviations must be positive");
  }
  require(benchmark.scenarios >= 1, "benchmark.scenarios", "must be positive");
  for (const auto& p : benchmark.policies) {
    require(!p.name.empty() && !p.tables.empty(), "benchmark.policies", "each entry needs a name and a tables file");
  }
  require(!compare.lambdas.empty(), "compare.lambdas", "must not be empty");
  for (double l : compare.lambdas) require(l >= 0.0 && l <= 1.0, "compare.lambdas", "must lie in [0, 1]");
  require(!compare.checkpoints.empty(), "compare.checkpoints", "must not be empty");
  for (std::size_t i = 0; i < compare.checkpoints.size(); ++i) {
    require(compare.checkpoints[i] >= 1, "compare.checkpoints", "must be positive");
    require(i == 0 || compare.checkpoints[i] > compare.checkpoints[i - 1], "compare.checkpoints", "must be increasing");
  }
  require(!density.points.empty(), "density.points", "must not be empty");
  for (int p : density.points) require(p >= 1 && p <= 2000, "density.points", "must lie in 1..2000");
  require(trace.every >= 0, "trace.every", "must be nonnegative");
  require(!seeds.empty(), "seeds", "needs at least one seed");
  require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(), "seeds", "must be distinct");
  require(!output.empty(), "output", "must not be empty");
  require(threads >= 0, "threads", "must be nonnegative");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

}  // namespace dqbrm
