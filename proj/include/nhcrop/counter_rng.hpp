#pragma once

#include <cstdint>
#include <string_view>

namespace nhcrop {

// Stateless keyed generator: every draw is a pure function of
// (key, round, channel, index), so any draw can be recomputed without
// replaying earlier ones and independent consumers never perturb each other.
class CounterRng {
 public:
  CounterRng() = default;
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  // Key derived from a setting name and seed.
  static CounterRng for_run(std::string_view setting_id, std::uint64_t seed);

  // A child generator for an independent consumer (named stream).
  CounterRng derive(std::string_view stream) const;

  std::uint64_t bits(std::uint64_t round, std::uint64_t channel, std::uint64_t index = 0) const;
  // Uniform in [0,1) with 53 random bits.
  double uniform(std::uint64_t round, std::uint64_t channel, std::uint64_t index = 0) const;
  // Standard normal via Box-Muller on two sub-draws.
  double normal(std::uint64_t round, std::uint64_t channel, std::uint64_t index = 0) const;
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n, std::uint64_t round, std::uint64_t channel, std::uint64_t index = 0) const;

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);
// FNV-1a over the bytes of a string.
std::uint64_t hash_string(std::string_view text);

}  // namespace nhcrop
