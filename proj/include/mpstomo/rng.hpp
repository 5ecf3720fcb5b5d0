#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace mpstomo {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A generator is identified by (seed, stream). The 64-bit seed is the key;
// the stream id occupies the upper half of the 128-bit counter and the lower
// half counts blocks. Record i of a dataset draws from stream i, so record
// content never depends on how records are scheduled across threads.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 4) {
      Counter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                  static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
      buffer_ = generate(ctr, key_);
      ++block_;
      lane_ = 0;
    }
    return buffer_[lane_++];
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = (*this)() >> 5;  // 27 bits
    const std::uint64_t lo = (*this)() >> 6;  // 26 bits
    return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
  }

  bool coin() { return ((*this)() >> 31) != 0; }

  void discard(std::uint64_t z) {
    for (; z > 0; --z) (*this)();
  }

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Counter buffer_{};
  int lane_ = 4;
};

// Uniform double in [0, 1) from any generator; Philox uses its own 53-bit path.
template <class Rng>
double uniform01(Rng& rng) {
  if constexpr (requires { rng.uniform(); }) {
    return rng.uniform();
  } else {
    return std::generate_canonical<double, 53>(rng);
  }
}

// Derive an independent 64-bit seed for a labelled sub-task (restart r of
// seed s, cell (N, seed) of a scaling grid, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
  Philox4x32 g(seed, label ^ 0x5eed5eed5eed5eedULL);
  const std::uint64_t hi = g();
  return (hi << 32) | g();
}

}  // namespace mpstomo
