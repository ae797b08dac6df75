#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace aoigpr {

using Engine = std::mt19937_64;

/// Derives independent, named random substreams from one master seed.
///
/// A substream is a pure function of (master seed, name, indices), so turning
/// one subsystem on or off never shifts the draws seen by another.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t master_seed) : seed_(master_seed) {}

  std::uint64_t master_seed() const noexcept { return seed_; }

  Engine stream(std::string_view name, std::initializer_list<std::uint64_t> indices = {}) const;

  static std::uint64_t splitmix64(std::uint64_t x) noexcept;

 private:
  std::uint64_t seed_;
};

}  // namespace aoigpr
