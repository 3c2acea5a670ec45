#pragma once

#include <cstdint>
#include <limits>

namespace dqbrm {

enum class Purpose : std::uint64_t {
  u_sample = 1,
  q_sample = 2,
  explore = 3,
  init_state = 4,
  scenario = 5,
  auxiliary = 6,
};

/// SplitMix64 generator. Satisfies UniformRandomBitGenerator so it plugs into
/// the <random> distributions.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
};

/// Counter-based substreams: every (iteration, stage, purpose) key maps to an
/// independent generator derived from the master seed, so the draws consumed
/// for one purpose never shift the draws of another.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  RngStream stream(std::uint64_t n, std::uint64_t t, Purpose purpose) const;

 private:
  std::uint64_t seed_;
};

}  // namespace dqbrm
