#pragma once

#include <cstdint>
#include <random>

namespace condtest {

// splitmix64 finalizer. Used for seed derivation so that child streams are
// decorrelated even when indices are consecutive.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-mode seed splitting: the derived seed depends only on (master, index),
// never on how many values have been drawn from any stream. This is what makes
// multi-threaded trial runs schedule-independent.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ mix64(index + 1));
}

// A seeded random stream. All randomness in the library flows through explicit
// RngStream instances; there is no global generator.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  // Independent child stream; does not disturb this stream's state.
  RngStream child(std::uint64_t index) const {
    return RngStream(derive_seed(seed_, index));
  }

  std::uint64_t seed() const { return seed_; }

  double uniform01() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  // Integer uniform on [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return std::bernoulli_distribution(p)(engine_);
  }

  // Binomial(t, p); used for batched histogram sampling.
  std::int64_t binomial(std::int64_t t, double p) {
    if (t <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return t;
    return std::binomial_distribution<std::int64_t>(t, p)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace condtest
