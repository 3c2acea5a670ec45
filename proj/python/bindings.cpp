#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dqbrm/errors.hpp"
#include "dqbrm/harness.hpp"
#include "dqbrm/models.hpp"

namespace py = pybind11;
using namespace dqbrm;

namespace {

WeightedSample to_sample(std::vector<double> values, std::optional<std::vector<double>> weights) {
  if (weights) return WeightedSample(std::move(values), std::move(*weights));
  return WeightedSample::uniform(std::move(values));
}

ExperimentConfig parse(const std::string& text) {
  try {
    return ExperimentConfig::from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

py::array_t<double> table_array(const ValueTable& q) {
  py::array_t<double> out({q.horizon(), q.pairs()});
  auto m = out.mutable_unchecked<2>();
  for (int t = 0; t < q.horizon(); ++t) {
    for (int p = 0; p < q.pairs(); ++p) m(t, p) = q.at(t, p);
  }
  return out;
}

py::dict solve(const std::string& config_json, std::uint64_t seed, std::optional<std::int64_t> iterations) {
  ExperimentConfig c = parse(config_json);
  c.validate();
  const auto entry = make_model(c.model);
  const auto spec = make_spec(c.risk);
  const auto problem = make_problem(c, entry, spec);
  const std::int64_t n = iterations.value_or(c.solver.iterations);
  AdpState adp;
  std::optional<RdsState> rds_state;
  {
    py::gil_scoped_release release;
    if (c.rds.enabled) {
      const RdsConfig rds = make_rds(c, entry);
      rds_state = run_with_rds(problem, rds, initial_rds_state(problem, rds, c.rds.theta0), n, RngStreams(seed));
      adp = rds_state->adp;
    } else {
      adp = run(problem, initial_state(problem), n, RngStreams(seed));
    }
  }
  py::dict out;
  if (rds_state) {
    const auto& th = rds_state->theta;
    py::array_t<double> theta({th.horizon(), th.pairs(), th.components()});
    std::copy(th.data().begin(), th.data().end(), theta.mutable_data());
    out["theta"] = theta;
    out["lr_cap_hits"] = rds_state->lr_cap_hits;
  }
  py::array_t<double> u({adp.u.levels(), adp.u.horizon(), adp.u.pairs()});
  std::copy(adp.u.data().begin(), adp.u.data().end(), u.mutable_data());
  std::vector<std::pair<int, int>> pairs;
  for (int p = 0; p < problem.space.size(); ++p) pairs.push_back(problem.space.pair(p));
  out["q"] = table_array(adp.q);  // terminal slice dropped
  out["u"] = u;
  out["pairs"] = pairs;
  out["iterations"] = adp.iteration;
  return out;
}

py::tuple run_command(const std::string& command, const std::string& config_json) {
  std::ostringstream log, err;
  int code;
  try {
    const ExperimentConfig c = parse(config_json);
    c.validate();
    py::gil_scoped_release release;
    code = dispatch(command, c, log, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    code = 1;
  }
  return py::make_tuple(code, log.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Risk-averse finite-horizon MDP solvers with quantile-based risk measures";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("empirical_quantile", [](std::vector<double> v, double alpha, std::optional<std::vector<double>> w) {
    return empirical_quantile(to_sample(std::move(v), std::move(w)), alpha);
  }, py::arg("values"), py::arg("alpha"), py::arg("weights") = py::none());
  m.def("empirical_cvar", [](std::vector<double> v, double alpha, std::optional<std::vector<double>> w) {
    return empirical_cvar(to_sample(std::move(v), std::move(w)), alpha);
  }, py::arg("values"), py::arg("alpha"), py::arg("weights") = py::none());
  m.def("empirical_qbrm", [](std::vector<double> v, const std::string& risk_json, std::optional<std::vector<double>> w) {
    const ExperimentConfig c = parse("{\"risk\": " + risk_json + "}");
    return empirical_qbrm(to_sample(std::move(v), std::move(w)), make_spec(c.risk));
  }, py::arg("values"), py::arg("risk_json"), py::arg("weights") = py::none());

  m.def("model_names", &model_names);
  m.def("solve", &solve, py::arg("config_json"), py::arg("seed") = 1, py::arg("iterations") = py::none());
  m.def("run_command", &run_command, py::arg("command"), py::arg("config_json"));
}
