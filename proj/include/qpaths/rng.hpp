#pragma once

// Counter-derived random streams. Each work unit (chain, particle, restart)
// draws from Rng::stream(seed, unit, step), so results do not depend on how
// units are scheduled onto threads.

#include <cstdint>
#include <limits>
#include <random>

namespace qpaths {

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);
  static Rng stream(std::uint64_t seed, std::uint64_t unit, std::uint64_t step = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  double normal();
  /// Gamma(shape, scale = 1).
  double gamma(double shape);

 private:
  std::uint64_t s_[4];
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace qpaths
