#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace cbayes {

/// One step of SplitMix64. Advances `state` and returns the mixed output.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed splitting rule used throughout the project: the child seed for
/// (stream, index) is the SplitMix64 output after absorbing master, stream and
/// index in that order. Distinct (stream, index) pairs give independent seeds,
/// and any child can be reproduced without replaying its siblings.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t s = master;
  std::uint64_t out = splitmix64(s);
  s ^= stream * 0xd1b54a32d192ed03ULL;
  out ^= splitmix64(s);
  s ^= index * 0x8cb92ba72f3d8dd7ULL;
  out ^= splitmix64(s);
  return out;
}

/// Random source with a fully specified algorithm: std::mt19937_64 (whose
/// output sequence is fixed by the C++ standard) seeded through SplitMix64,
/// with variate transforms implemented here rather than taken from
/// <random>'s implementation-defined distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  /// Standard normal via the Marsaglia polar method.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double rate = 1.0);
  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n) by rejection, n > 0.
  std::size_t index(std::size_t n);

  template <class T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t seed) { return splitmix64(seed); }

  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cbayes
