#include "jscc/rng.hpp"

#include <cmath>

namespace jscc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, Stream purpose,
                          std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = derive_seed(master, {static_cast<std::uint64_t>(purpose)});
  for (std::uint64_t c : coords) h = derive_seed(h, {c});
  return h;
}

RealGrid complex_gaussian(std::size_t n, double variance, Rng& rng) {
  RealGrid out(Shape{n, 2});
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  for (double& v : out.values()) v = normal(rng);
  return out;
}

}  // namespace jscc
