#pragma once

#include <cstdint>
#include <random>

namespace verifree {

// splitmix64; used to turn (seed, step, prompt, slot) tuples into
// independent engine seeds so rollout streams do not depend on worker count.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_stream_id(std::uint64_t seed, std::uint64_t a = 0,
                                      std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ mix64(a + 1));
  h = mix64(h ^ mix64(b + 1));
  h = mix64(h ^ mix64(c + 1));
  return h;
}

/// One rollout's private random stream. The id is recorded in the Rollout so
/// a sample can be reproduced in isolation.
struct RolloutRng {
  std::uint64_t stream_id;
  std::mt19937_64 engine;

  explicit RolloutRng(std::uint64_t stream_id)
      : stream_id(stream_id), engine(stream_id) {}

  double uniform01() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine);
  }
};

inline RolloutRng make_rollout_rng(std::uint64_t seed, std::uint64_t step,
                                   std::uint64_t prompt_index, std::uint64_t group_slot) {
  return RolloutRng(derive_stream_id(seed, step, prompt_index, group_slot));
}

}  // namespace verifree
