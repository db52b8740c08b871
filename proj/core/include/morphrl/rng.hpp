#pragma once

#include <cstdint>
#include <utility>

namespace morphrl {

/// Counter-based deterministic random stream (SplitMix64 mixing).
///
/// A stream is fully described by (key, counter), so its position can be
/// recorded, replayed and serialized. Independent child streams are derived
/// with split(), which makes results independent of scheduling order when
/// each parallel environment owns its own stream.
class RandomStream {
 public:
  RandomStream() = default;
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  /// Derived stream that is statistically independent of this one.
  /// Does not advance this stream.
  RandomStream split(std::uint64_t child_id) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double next_double();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (two uniforms per call, no cached spare).
  double normal();
  double normal(double mean, double stddev);
  bool bernoulli(double p);
  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }
  void set_state(std::uint64_t key, std::uint64_t counter) {
    key_ = key;
    counter_ = counter;
  }

  friend bool operator==(const RandomStream&, const RandomStream&) = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace morphrl
