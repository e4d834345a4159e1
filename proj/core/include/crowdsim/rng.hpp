#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace crowdsim {

/// Counter-based random source. Every draw is a pure function of
/// (seed, key...), so per-agent draws do not depend on the order in which
/// agents are visited.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed = 0) : seed_(seed) {}

  constexpr std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::initializer_list<std::uint64_t> key) const {
    std::uint64_t h = mix(seed_ ^ 0x9e3779b97f4a7c15ULL);
    for (std::uint64_t k : key) h = mix(h ^ mix(k + 0x632be59bd9b4e019ULL));
    return h;
  }

  /// Uniform in [0, 1).
  double uniform(std::initializer_list<std::uint64_t> key) const {
    return to_unit(bits(key));
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n, std::initializer_list<std::uint64_t> key) const {
    return reduce(bits(key), n);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr double to_unit(std::uint64_t b) {
    return static_cast<double>(b >> 11) * 0x1.0p-53;
  }

  static std::uint64_t reduce(std::uint64_t b, std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(b) * n) >> 64);
  }

 private:
  std::uint64_t seed_;
};

/// Sequential stream over a CounterRng key prefix. Satisfies
/// UniformRandomBitGenerator so it can drive std::shuffle.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(CounterRng rng, std::uint64_t stream) : rng_(rng), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return rng_.bits({stream_, counter_++}); }

  double uniform() { return CounterRng::to_unit((*this)()); }
  std::uint64_t below(std::uint64_t n) { return CounterRng::reduce((*this)(), n); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  CounterRng rng_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

// Stream identifiers. Keeping them distinct keeps unrelated draws independent.
namespace rng_stream {
inline constexpr std::uint64_t kSpawn = 1;
inline constexpr std::uint64_t kEmotion = 2;
inline constexpr std::uint64_t kExplore = 3;
inline constexpr std::uint64_t kExploreAction = 4;
inline constexpr std::uint64_t kRandomPolicy = 5;
inline constexpr std::uint64_t kReplaySample = 6;
inline constexpr std::uint64_t kInit = 7;
inline constexpr std::uint64_t kRoundSeed = 8;
inline constexpr std::uint64_t kInspect = 9;
}  // namespace rng_stream

}  // namespace crowdsim
