#pragma once

#include <cstdint>

namespace ipp {

/// One SplitMix64 step: advances `state` and returns the mixed output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Independent stream seed for (base, stream, index).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t s = base;
  std::uint64_t a = splitmix64(s) ^ (stream * 0xD1B54A32D192ED03ull);
  std::uint64_t b = splitmix64(a) ^ (index * 0x8CB92BA72F3D8DD7ull);
  return splitmix64(b);
}

/// Ground-truth seeds for training and evaluation never collide: the top bit
/// separates the two sets.
enum class SeedSet : std::uint64_t { Training = 0, Evaluation = 1 };

inline std::uint64_t gt_seed(std::uint64_t base, SeedSet set, std::uint64_t episode) {
  const std::uint64_t raw = derive_seed(base, 0x67745F736565ull, episode) >> 1;
  return raw | (static_cast<std::uint64_t>(set) << 63);
}

}  // namespace ipp
