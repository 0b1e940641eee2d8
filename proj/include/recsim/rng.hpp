#pragma once

#include <cmath>
#include <cstdint>

namespace recsim {

// Counter-based random stream. The state is a (key, counter) pair and every
// output is a hash of the pair, so a stream can be forked per replicate and
// per data point: identical (seed, stream_id) always reproduces the same
// sequence regardless of thread count or interleaving.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : key_(mix(mix(seed + kSalt) ^ mix(stream_id + kFork))), counter_(0) {}

  // Derives an independent substream; deterministic and collision-resistant
  // for the lane counts used here (one lane per point / replicate / purpose).
  RngStream fork(std::uint64_t lane) const {
    RngStream child;
    child.key_ = mix(key_ + kFork * (lane + 1));
    child.counter_ = 0;
    return child;
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Standard normal via Box-Muller; the pair is cached.
  double next_gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1, u2;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(next_double() * static_cast<double>(n)) %
           n;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;
  static constexpr std::uint64_t kSalt = 0x5851f42d4c957f2dull;
  static constexpr std::uint64_t kFork = 0xbf58476d1ce4e5b9ull;

  // splitmix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z += kGamma;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace recsim
