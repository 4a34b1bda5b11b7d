#pragma once

#include <cstdint>
#include <random>

namespace snowpoly {

/// Uniform double in [0, 1) built from the top 53 bits of the generator,
/// so sampled sequences do not depend on the standard library's
/// distribution implementation.
inline double uniform01(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

}  // namespace snowpoly
