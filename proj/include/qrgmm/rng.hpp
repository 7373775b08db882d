#pragma once

#include <array>
#include <cstdint>

namespace qrgmm {

// i-th output of the splitmix64 sequence started at `seed`. O(1): the
// sequence state is seed + (i+1)*gamma, mixed.
inline std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t i) {
  std::uint64_t z = seed + (i + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic seeded generator used everywhere randomness is consumed.
//
// The algorithm is fixed and versioned (see kAlgorithm): xoshiro256++ with
// its four state words filled from splitmix64 of the seed. Identical seeds
// give identical streams, on any platform, in any build.
//
// Sub-streams: substream(i) derives an independent generator whose seed is
// the i-th splitmix64 output of this generator's *original* seed. The
// derivation depends only on (seed, i), never on how many values have been
// drawn, so callers can split streams up front and replay them in any order.
class SeededRng {
 public:
  static constexpr const char* kAlgorithm = "xoshiro256++/v1";

  explicit SeededRng(std::uint64_t seed) : seed_(seed) {
    for (int w = 0; w < 4; ++w) state_[w] = splitmix64_at(seed, w);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on (0,1), strictly: bin centers of the 2^53 grid, so neither
  // endpoint can ever be returned and inverse-CDF transforms stay finite.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  SeededRng substream(std::uint64_t index) const {
    return SeededRng(splitmix64_at(seed_, index));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_;
};

}  // namespace qrgmm
