#include "dqbrm/rng.hpp"

namespace dqbrm {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RngStream::below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection; unbiased.
  __uint128_t m = static_cast<__uint128_t>((*this)()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<__uint128_t>((*this)()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

RngStream RngStreams::stream(std::uint64_t n, std::uint64_t t, Purpose purpose) const {
  std::uint64_t h = mix(seed_ + 0x632be59bd9b4e019ULL);
  h = mix(h ^ (n + 0x9e3779b97f4a7c15ULL));
  h = mix(h ^ (t * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
  h = mix(h ^ (static_cast<std::uint64_t>(purpose) * 0xa0761d6478bd642fULL));
  return RngStream(h);
}

}  // namespace dqbrm
