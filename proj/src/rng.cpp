#include "qpaths/rng.hpp"

#include <bit>
#include <cmath>

namespace qpaths {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t st = seed;
  for (auto& s : s_) s = splitmix64(st);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t unit, std::uint64_t step) {
  std::uint64_t st = seed;
  std::uint64_t mixed = splitmix64(st);
  st = mixed ^ unit;
  mixed = splitmix64(st);
  st = mixed ^ step;
  return Rng(splitmix64(st));
}

Rng::result_type Rng::operator()() {
  const std::uint64_t result = std::rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = std::rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
  return (static_cast<double>((*this)() >> 12) + 0.5) * 0x1.0p-52;
}

double Rng::normal() { return normal_(*this); }

double Rng::gamma(double shape) {
  std::gamma_distribution<double> g(shape, 1.0);
  return g(*this);
}

}  // namespace qpaths
