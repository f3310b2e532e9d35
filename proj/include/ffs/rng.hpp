#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace firstfinish {

// splitmix64 finalizer; used to whiten derived stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a, for deriving streams from string labels.
inline std::uint64_t hash_label(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Named, splittable deterministic random stream. Substreams depend only on
/// the parent's seed and the label/index, never on how many values were
/// drawn from the parent, so trace-level streams are stable across strategies.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(mix64(seed)), engine_(state_) {}

  RngStream substream(std::string_view label) const {
    return RngStream(state_ ^ mix64(hash_label(label)));
  }

  RngStream substream(std::uint64_t index) const {
    return RngStream(state_ ^ mix64(index * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double normal(double mu, double sigma) {
    return std::normal_distribution<double>(mu, sigma)(engine_);
  }

  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t state_;
  std::mt19937_64 engine_;
};

}  // namespace firstfinish
