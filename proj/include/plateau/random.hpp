#pragma once

#include <cstdint>
#include <limits>
#include <numbers>

namespace plateau {

/// SplitMix64 finalizer (Steele, Lea, Flood).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based stream: the draw sequence is a pure function of (master_seed, stream_id).
/// Each draw is mix64(key + counter * golden), i.e. SplitMix64 keyed per stream.
class RandomStream {
 public:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  RandomStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : master_(master_seed), id_(stream_id), key_(mix64(mix64(master_seed) ^ mix64(stream_id + kGolden))) {}

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }

  std::uint64_t next() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, 2pi).
  double angle() { return 2.0 * std::numbers::pi * uniform01(); }

  /// Uniform integer in [0, bound), unbiased (rejection on the low range).
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  std::uint64_t master_seed() const { return master_; }
  std::uint64_t stream_id() const { return id_; }

 private:
  std::uint64_t master_;
  std::uint64_t id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace plateau
