#pragma once

#include <cstdint>
#include <random>

namespace immfpf::rng {

/// Named noise sources. Each (master seed, stream, a, b) tuple maps to an
/// independent engine, so draws never depend on execution order.
enum class Stream : std::uint64_t {
  mode_chain = 0x6d6f6465ULL,
  truth_diffusion = 0x74727468ULL,
  observation_noise = 0x6f627376ULL,
  particle_init = 0x696e6974ULL,
  particle_noise = 0x6e6f6973ULL,
  test = 0x74657374ULL,
};

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b * 0xd6e8feb86659fd93ULL));
  return h;
}

inline Engine engine(std::uint64_t master, Stream stream, std::uint64_t a = 0,
                     std::uint64_t b = 0) {
  return Engine(derive_seed(master, stream, a, b));
}

}  // namespace immfpf::rng
