#pragma once

#include <cstdint>
#include <random>

namespace fedism {

using Rng = std::mt19937_64;

/// Stream tags for the seed splitting rule. Every random draw in the
/// simulator comes from a generator seeded by derive_seed(master, tag, index),
/// so two draws never share a stream and results do not depend on the order
/// in which clients or seeds are processed.
enum class Stream : std::uint64_t {
  task = 1,
  split = 2,
  partition = 3,
  corrupt_select = 4,
  corrupt_client = 5,
  corrupt_test = 6,
  init = 7,
  round = 8,
  local_shuffle = 9,
  landscape = 10,
  verify = 11,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream tag, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(master) ^ static_cast<std::uint64_t>(tag)) + index);
}

inline Rng make_rng(std::uint64_t master, Stream tag, std::uint64_t index = 0) {
  return Rng(derive_seed(master, tag, index));
}

}  // namespace fedism
