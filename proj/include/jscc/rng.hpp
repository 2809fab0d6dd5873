#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "jscc/grid.hpp"

namespace jscc {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a master seed and a tuple of
/// stream coordinates (e.g. step, batch index, purpose tag).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords);

/// Stream purposes used with derive_seed.
enum class Stream : std::uint64_t {
  channel = 1,
  noise = 2,
  shuffle = 3,
  init = 4,
  data = 5,
  validation = 6,
};

std::uint64_t derive_seed(std::uint64_t master, Stream purpose,
                          std::initializer_list<std::uint64_t> coords = {});

/// (n, 2) i.i.d. circular complex Gaussian samples with E|z|^2 = variance.
RealGrid complex_gaussian(std::size_t n, double variance, Rng& rng);

}  // namespace jscc
