#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rocsurv {

using Rng = std::mt19937_64;

/// Derives an independent 64-bit stream seed from (seed, purpose, index).
///
/// The purpose tag is hashed with FNV-1a and mixed with the seed and index
/// through splitmix64, so streams for different purposes or indices never
/// share state even when the user seed is small.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

inline Rng make_stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, purpose, index));
}

}  // namespace rocsurv
