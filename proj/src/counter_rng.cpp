#include "nhcrop/counter_rng.hpp"

#include <cmath>
#include <numbers>

namespace nhcrop {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

CounterRng CounterRng::for_run(std::string_view setting_id, std::uint64_t seed) {
  return CounterRng(splitmix64(hash_string(setting_id) ^ splitmix64(seed)));
}

CounterRng CounterRng::derive(std::string_view stream) const {
  return CounterRng(splitmix64(key_ ^ hash_string(stream)));
}

std::uint64_t CounterRng::bits(std::uint64_t round, std::uint64_t channel, std::uint64_t index) const {
  std::uint64_t h = splitmix64(key_ ^ splitmix64(round));
  h = splitmix64(h ^ splitmix64(channel + 0x632be59bd9b4e019ULL));
  return splitmix64(h ^ splitmix64(index + 0x8cb92ba72f3d8dd7ULL));
}

double CounterRng::uniform(std::uint64_t round, std::uint64_t channel, std::uint64_t index) const {
  return static_cast<double>(bits(round, channel, index) >> 11) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t round, std::uint64_t channel, std::uint64_t index) const {
  // Sub-draws 2i and 2i+1 feed one Box-Muller transform; u1 is kept in (0,1].
  const double u1 = 1.0 - uniform(round, channel, 2 * index);
  const double u2 = uniform(round, channel, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::below(std::uint64_t n, std::uint64_t round, std::uint64_t channel,
                                std::uint64_t index) const {
  if (n == 0) return 0;
  return static_cast<std::uint64_t>(uniform(round, channel, index) * static_cast<double>(n)) % n;
}

}  // namespace nhcrop
