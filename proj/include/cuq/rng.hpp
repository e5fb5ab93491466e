#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace cuq::rng {

/// splitmix64. Used for seeding and for deriving independent substreams.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Substream derivation rule used throughout the library:
///   stream_seed(master, i) = SplitMix64(master XOR golden*(i+1)).next()
/// Every parallelizable unit of work (window, resample, permutation) draws
/// its seed through this function, so results are independent of evaluation
/// order and thread count.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  SplitMix64 sm(master ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  return sm.next();
}

/// xoshiro256** with splitmix64 seeding. Deterministic across platforms;
/// all derived draws (bounded ints, uniforms, Gaussians) are implemented
/// here rather than via std distributions, which are not portable.
class Engine {
 public:
  explicit Engine(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : state_) w = sm.next();
  }

  /// Engine for substream `stream` of `master`. See stream_seed().
  static Engine for_stream(std::uint64_t master, std::uint64_t stream) {
    return Engine(stream_seed(master, stream));
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform index in [0, n). Multiply-shift bounded draw; bias < n / 2^64.
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  /// Standard normal draw, Marsaglia polar method (pairs cached).
  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * f;
    have_cached_ = true;
    return u * f;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace cuq::rng
