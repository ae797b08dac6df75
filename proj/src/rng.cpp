#include "aoigpr/rng.hpp"

namespace aoigpr {

std::uint64_t RngStreams::splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Engine RngStreams::stream(std::string_view name, std::initializer_list<std::uint64_t> indices) const {
  // FNV-1a over the name, then fold in the seed and each index.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  std::uint64_t state = splitmix64(seed_ ^ splitmix64(h));
  for (auto i : indices) state = splitmix64(state ^ splitmix64(i + 0x632BE59BD9B4E019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(state), static_cast<std::uint32_t>(state >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Engine(seq);
}

}  // namespace aoigpr
