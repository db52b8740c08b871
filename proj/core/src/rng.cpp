#include "morphrl/rng.hpp"

#include <cmath>
#include <numbers>

namespace morphrl {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id) {
  // Two mixing rounds decorrelate nearby (seed, stream_id) pairs.
  key_ = mix64(mix64(seed + kGolden) ^ mix64(stream_id * 0xda942042e4dd58b5ULL + 1));
  counter_ = 0;
}

RandomStream RandomStream::split(std::uint64_t child_id) const {
  RandomStream child;
  child.key_ = mix64(key_ ^ mix64(child_id * kGolden + 0x3c6ef372fe94f82aULL));
  child.counter_ = 0;
  return child;
}

std::uint64_t RandomStream::next_u64() {
  counter_ += 1;
  return mix64(key_ + counter_ * kGolden);
}

double RandomStream::next_double() {
  // 53 high bits -> [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

double RandomStream::normal() {
  // Box-Muller; u clamped away from 0 so log() stays finite.
  double u = next_double();
  double v = next_double();
  if (u < 0x1.0p-60) u = 0x1.0p-60;
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

double RandomStream::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

bool RandomStream::bernoulli(double p) { return next_double() < p; }

std::uint64_t RandomStream::next_below(std::uint64_t n) {
  if (n == 0) return 0;
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = n * ((~0ULL) / n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

}  // namespace morphrl
