#pragma once

#include <cstdint>
#include <random>

namespace qnd {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class StreamDomain : std::uint64_t { trial = 1, drift = 2, bootstrap = 3, synthetic = 4 };

/// Independent generator for (master_seed, domain, index); depends on nothing else,
/// so results do not depend on the order in which streams are created.
inline std::mt19937_64 make_stream(std::uint64_t master_seed, StreamDomain domain, std::uint64_t index) {
  std::uint64_t s = master_seed;
  std::uint64_t a = splitmix64(s);
  s = a ^ (static_cast<std::uint64_t>(domain) * 0xd1b54a32d192ed03ULL);
  std::uint64_t b = splitmix64(s);
  s = b ^ index;
  splitmix64(s);
  const std::uint64_t c = splitmix64(s);
  const std::uint64_t d = splitmix64(s);
  std::seed_seq seq{static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32), static_cast<std::uint32_t>(d),
                    static_cast<std::uint32_t>(d >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace qnd
