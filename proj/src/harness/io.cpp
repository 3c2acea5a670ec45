#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "dqbrm/errors.hpp"
#include "dqbrm/harness.hpp"

namespace dqbrm {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("malformed number '" + s + "' in " + where);
  }
  return v;
}

}  // namespace

void write_tables(const std::filesystem::path& path, const MdpModel& model, const ValueTable& q,
                  const AuxQuantileTable* u) {
  StateActionSpace space(model);
  const int m = u ? u->levels() : 0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "#schema=" << kTablesSchema << "\n";
  out << "t,pair,state,action,q";
  for (int i = 0; i < m; ++i) out << ",u" << i;
  out << "\n";
  for (int t = 0; t < q.horizon(); ++t) {
    for (int p = 0; p < q.pairs(); ++p) {
      out << t << ',' << p << ',' << space.state_of(p) << ',' << space.action_of(p) << ','
          << format_number(q.at(t, p));
      for (int i = 0; i < m; ++i) out << ',' << format_number(u->at(i, t, p));
      out << "\n";
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

LoadedTables read_tables(const std::filesystem::path& path, const MdpModel& model) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tables file " + path.string());
  StateActionSpace space(model);
  const int T = model.horizon();
  const int d = space.size();
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split(line);
    break;
  }
  if (header.size() < 5 || header[0] != "t" || header[1] != "pair" || header[4] != "q") {
    throw ConfigError("tables file " + path.string() + " has an unexpected header");
  }
  const int m = static_cast<int>(header.size()) - 5;
  LoadedTables tables{ValueTable(T, d), std::nullopt};
  if (m > 0) tables.u.emplace(m, T, d);
  std::vector<char> seen(std::size_t(T) * d, 0);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (cells.size() != header.size()) throw ConfigError("ragged row in " + path.string());
    const int t = static_cast<int>(parse_double(cells[0], path.string()));
    const int p = static_cast<int>(parse_double(cells[1], path.string()));
    if (t < 0 || t >= T || p < 0 || p >= d) {
      throw ConfigError("tables file " + path.string() + " does not match model '" + model.name() + "'");
    }
    const int s = static_cast<int>(parse_double(cells[2], path.string()));
    const int a = static_cast<int>(parse_double(cells[3], path.string()));
    if (space.state_of(p) != s || space.action_of(p) != a) {
      throw ConfigError("tables file " + path.string() + " enumerates pairs differently from the model");
    }
    tables.q.at(t, p) = parse_double(cells[4], path.string());
    for (int i = 0; i < m; ++i) tables.u->at(i, t, p) = parse_double(cells[5 + i], path.string());
    seen[std::size_t(t) * d + p] = 1;
  }
  for (char c : seen) {
    if (!c) throw ConfigError("tables file " + path.string() + " is missing rows");
  }
  return tables;
}

namespace {

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

TraceWriter::TraceWriter(std::ostream& out, int levels, const std::vector<WatchedPair>& watched,
                         bool has_reference, bool wall_clock)
    : out_(out), has_reference_(has_reference), wall_clock_(wall_clock), start_(now_seconds()) {
  out_ << "#schema=" << kTraceSchema << "\n";
  out_ << "n,first_pair";
  if (has_reference_) out_ << ",err_inf,err_l2";
  out_ << ",lr_cap_hits";
  for (const auto& w : watched) out_ << ",q_t" << w.t << "_p" << w.pair;
  for (int i = 0; i < levels; ++i) {
    for (const auto& w : watched) out_ << ",u" << i << "_t" << w.t << "_p" << w.pair;
  }
  if (wall_clock_) out_ << ",wall_clock";
  out_ << "\n";
}

void TraceWriter::write(const TraceRecord& r) {
  out_ << r.n << ',' << r.first_pair;
  if (has_reference_) {
    out_ << ',' << format_number(r.err_inf.value_or(NAN)) << ',' << format_number(r.err_l2.value_or(NAN));
  }
  out_ << ',' << r.lr_cap_hits;
  for (double q : r.watched_q) out_ << ',' << format_number(q);
  for (const auto& level : r.watched_u) {
    for (double u : level) out_ << ',' << format_number(u);
  }
  if (wall_clock_) out_ << ',' << format_number(now_seconds() - start_);
  out_ << "\n";
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int k = 0; k < threads; ++k) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        {
          std::lock_guard lock(mu);
          if (failure) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dqbrm
