#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace feddr {

using Rng = std::mt19937_64;

// Stream tags so that independent consumers never share a generator.
enum class Stream : std::uint64_t {
  sampling = 1,
  local_solver = 2,
  compute_time = 3,
  data = 4,
  problem = 5,
  init = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                 std::initializer_list<std::uint64_t> tags = {}) noexcept {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)));
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed, Stream stream,
                    std::initializer_list<std::uint64_t> tags = {}) {
  return Rng(derive_seed(seed, stream, tags));
}

}  // namespace feddr
