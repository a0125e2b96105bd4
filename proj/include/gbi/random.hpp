#pragma once

#include <cstdint>
#include <string_view>

#include "gbi/normal.hpp"

namespace gbi {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named substream of a top-level seed ("simulation", "training", ...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : tag) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

/// Counter-based generator: the state of stream `stream` under `seed` is a pure
/// function of (seed, stream, draw index), so paths can be generated in any order.
class UniformStream {
 public:
  UniformStream(std::uint64_t seed, std::uint64_t stream)
      : key_(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform on the open interval (0, 1).
  double next_uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : uniform_(seed, stream) {}
  double operator()() { return normal_quantile(uniform_.next_uniform()); }

 private:
  UniformStream uniform_;
};

}  // namespace gbi
