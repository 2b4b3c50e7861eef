#pragma once

// Seeded randomness with platform-independent transforms. std:: distributions
// are implementation-defined, so only the raw engine output is used.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace tse {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Independent sub-seed for a named stream of a master seed.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream * 0xd1342543de82ef95ULL + 1));
}

// 53-bit mantissa mapping to [0, 1).
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return to_unit(engine_()); }

  // Exponential variate with the given rate (events per unit time).
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// Counter-based uniform in [0, 1) keyed by (seed, key, salt). Identical keys give
// identical draws regardless of evaluation order, which couples experiments that
// differ only in a probability threshold.
inline double keyed_uniform(std::uint64_t seed, std::string_view key, std::uint64_t salt = 0) {
  return to_unit(splitmix64(splitmix64(seed ^ fnv1a64(key)) + salt * 0x9e3779b97f4a7c15ULL));
}

}  // namespace tse
