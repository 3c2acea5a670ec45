#include "dqbrm/saa.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dqbrm/errors.hpp"

namespace dqbrm {

ScenarioSet::ScenarioSet(int dim, std::vector<std::vector<Noise>> draws)
    : dim_(dim), draws_(std::move(draws)) {
  if (dim_ < 1 || dim_ > static_cast<int>(kMaxNoiseDim)) {
    throw std::invalid_argument("scenario set: unsupported noise dimension");
  }
  if (draws_.empty()) throw std::invalid_argument("scenario set: no stages");
  for (const auto& d : draws_) {
    if (d.empty()) throw std::invalid_argument("scenario set: empty stage");
  }
}

ScenarioSet ScenarioSet::sample(const NoiseModel& law, int horizon, int count, const RngStreams& rng) {
  if (horizon < 1 || count < 1) throw std::invalid_argument("scenario set: horizon and count must be positive");
  std::vector<std::vector<Noise>> draws(horizon);
  for (int t = 0; t < horizon; ++t) {
    RngStream stream = rng.stream(0, t, Purpose::scenario);
    draws[t].reserve(count);
    for (int j = 0; j < count; ++j) draws[t].push_back(law.sample(t, stream));
  }
  return ScenarioSet(law.dim(), std::move(draws));
}

namespace {

std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("scenario CSV: bad number '" + std::string(s) + "'");
  }
  return x;
}

constexpr char kMagic[8] = {'D', 'Q', 'B', 'R', 'M', 'S', 'C', '1'};

}  // namespace

void ScenarioSet::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,draw";
  for (int k = 0; k < dim_; ++k) out << ",w" << k;
  out << '\n';
  for (int t = 0; t < horizon(); ++t) {
    for (std::size_t j = 0; j < draws_[t].size(); ++j) {
      out << t << ',' << j;
      for (int k = 0; k < dim_; ++k) out << ',' << format_double(draws_[t][j][k]);
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ScenarioSet ScenarioSet::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,draw", 0) != 0) {
    throw std::runtime_error("scenario CSV: missing header");
  }
  int dim = 0;
  for (char c : line) dim += c == ',';
  dim -= 1;
  std::vector<std::vector<Noise>> draws;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (static_cast<int>(fields.size()) != dim + 2) throw std::runtime_error("scenario CSV: wrong column count");
    const int t = static_cast<int>(parse_double(fields[0]));
    const auto j = static_cast<std::size_t>(parse_double(fields[1]));
    if (t < 0) throw std::runtime_error("scenario CSV: negative stage");
    if (static_cast<int>(draws.size()) <= t) draws.resize(t + 1);
    if (draws[t].size() != j) throw std::runtime_error("scenario CSV: draws out of order");
    Noise w{};
    for (int k = 0; k < dim; ++k) w[k] = parse_double(fields[k + 2]);
    draws[t].push_back(w);
  }
  return ScenarioSet(dim, std::move(draws));
}

void ScenarioSet::save_binary(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::int32_t header[2] = {dim_, horizon()};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  for (const auto& stage : draws_) {
    const std::uint64_t n = stage.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    for (const Noise& w : stage) out.write(reinterpret_cast<const char*>(w.data()), sizeof(double) * dim_);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ScenarioSet ScenarioSet::load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("scenario file: bad magic");
  }
  std::int32_t header[2];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || header[0] < 1 || header[0] > static_cast<int>(kMaxNoiseDim) || header[1] < 1) {
    throw std::runtime_error("scenario file: bad header");
  }
  std::vector<std::vector<Noise>> draws(header[1]);
  for (auto& stage : draws) {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in) throw std::runtime_error("scenario file: truncated");
    stage.resize(n, Noise{});
    for (Noise& w : stage) in.read(reinterpret_cast<char*>(w.data()), sizeof(double) * header[0]);
    if (!in) throw std::runtime_error("scenario file: truncated");
  }
  return ScenarioSet(header[0], std::move(draws));
}

void validate_policy(const MdpModel& model, const PolicyTable& policy) {
  if (policy.horizon != model.horizon() || policy.num_states != model.num_states()) {
    throw std::invalid_argument("policy shape does not match the model");
  }
  for (int t = 0; t < policy.horizon; ++t) {
    for (int s = 0; s < policy.num_states; ++s) {
      const auto feasible = model.feasible_actions(s);
      if (!std::binary_search(feasible.begin(), feasible.end(), policy.at(t, s))) {
        throw std::invalid_argument("policy action at t=" + std::to_string(t) + ", s=" +
                                    std::to_string(s) + " is infeasible");
      }
    }
  }
}

namespace {

void check_scenarios(const MdpModel& model, const ScenarioSet& scenarios) {
  if (scenarios.horizon() != model.horizon()) {
    throw std::invalid_argument("scenario set horizon does not match the model");
  }
  for (int t = 0; t < scenarios.horizon(); ++t) {
    if (scenarios.count(t) == 0) throw std::invalid_argument("empty scenario set");
  }
  if (scenarios.dim() != model.noise().dim()) {
    throw std::invalid_argument("scenario dimension does not match the noise");
  }
}

// Empirical one-step risk of cost + continuation, internal units. `v_next` is
// indexed by state and holds internal values; null means zero continuation.
double stage_risk(const MdpModel& model, const QbrmSpec& spec, std::span<const Noise> draws, int t,
                  int s, int a, const double* v_next, std::vector<double>& buf) {
  buf.resize(draws.size());
  for (std::size_t j = 0; j < draws.size(); ++j) {
    double x = model.internal_cost(t, s, a, draws[j]);
    if (v_next) x += v_next[model.transition(t, s, a, draws[j])];
    buf[j] = x;
  }
  return uniform_sample_qbrm(buf, spec);
}

ValueFunctionSAA to_natural(const MdpModel& model, const std::vector<double>& internal) {
  const int T = model.horizon();
  const int S = model.num_states();
  ValueFunctionSAA v(T, S);
  for (int t = 0; t <= T; ++t) {
    for (int s = 0; s < S; ++s) v.at(t, s) = model.natural_value(internal[std::size_t(t) * S + s]) + 0.0;
  }
  return v;
}

}  // namespace

ValueFunctionSAA evaluate_policy(const MdpModel& model, const QbrmSpec& spec,
                                 const PolicyTable& policy, const ScenarioSet& scenarios) {
  check_scenarios(model, scenarios);
  validate_policy(model, policy);
  const int T = model.horizon();
  const int S = model.num_states();
  std::vector<double> v(std::size_t(T + 1) * S, 0.0);
  std::vector<double> buf;
  for (int t = T - 1; t >= 0; --t) {
    const double* next = v.data() + std::size_t(t + 1) * S;
    for (int s = 0; s < S; ++s) {
      v[std::size_t(t) * S + s] = stage_risk(model, spec, scenarios.at(t), t, s, policy.at(t, s), next, buf);
    }
  }
  return to_natural(model, v);
}

SaaSolution saa_optimal(const MdpModel& model, const QbrmSpec& spec, const ScenarioSet& scenarios) {
  check_scenarios(model, scenarios);
  const int T = model.horizon();
  const int S = model.num_states();
  const StateActionSpace space(model);
  SaaSolution out{ValueFunctionSAA(), PolicyTable(T, S), ValueTable(T, space.size())};
  std::vector<double> v(std::size_t(T + 1) * S, 0.0);
  std::vector<double> buf;
  for (int t = T - 1; t >= 0; --t) {
    const double* next = v.data() + std::size_t(t + 1) * S;
    for (int p = 0; p < space.size(); ++p) {
      out.q.at(t, p) = stage_risk(model, spec, scenarios.at(t), t, space.state_of(p), space.action_of(p), next, buf);
    }
    for (int s = 0; s < S; ++s) {
      const Greedy g = greedy_value(out.q.slice(t), space, s);
      v[std::size_t(t) * S + s] = g.value;
      out.policy.at(t, s) = g.action;
    }
  }
  out.value = to_natural(model, v);
  return out;
}

PolicyTable myopic_policy(const MdpModel& model, const QbrmSpec& spec, const ScenarioSet& scenarios) {
  check_scenarios(model, scenarios);
  const int T = model.horizon();
  const int S = model.num_states();
  PolicyTable policy(T, S);
  std::vector<double> buf;
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double best = std::numeric_limits<double>::infinity();
      policy.at(t, s) = model.feasible_actions(s).front();
      for (int a : model.feasible_actions(s)) {
        const double r = stage_risk(model, spec, scenarios.at(t), t, s, a, nullptr, buf);
        if (r < best) {
          best = r;
          policy.at(t, s) = a;
        }
      }
    }
  }
  return policy;
}

double percent_optimality(double v_pi, double v_myopic, double v_star) {
  if (v_star == v_myopic) {
    throw DegenerateBenchmarkError("optimal and myopic values coincide; percent optimality is undefined");
  }
  return (v_pi - v_myopic) / (v_star - v_myopic) + 0.0;  // no negative zero
}

}  // namespace dqbrm
