#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "condtest/errors.hpp"

namespace condtest {

namespace detail {

// Ceiling of a real-valued sample-count formula, clamped to a non-negative
// integer count.
inline std::int64_t ceil_count(double x) {
  double c = std::ceil(x);
  if (c < 0.0) return 0;
  return static_cast<std::int64_t>(c);
}

}  // namespace detail

// An explicit discrete probability distribution over {0, ..., n-1}.
// Immutable after construction. Entries must be non-negative and sum to 1
// within 1e-6; the constructor renormalizes so the stored sum is exact to
// 1e-9, and rejects anything worse.
class Distribution {
 public:
  // Empty placeholder (n = 0) so result structs can default-construct; every
  // factory and constructor below produces n >= 1.
  Distribution() = default;

  explicit Distribution(std::vector<double> probs) : p_(std::move(probs)) {
    if (p_.empty()) throw DomainMismatchError("distribution must have n >= 1");
    double sum = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0)) throw DomainMismatchError("negative or NaN probability entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw DomainMismatchError("probabilities sum to " + std::to_string(sum) + ", not 1");
    for (double& v : p_) v /= sum;
  }

  int n() const { return static_cast<int>(p_.size()); }
  double prob(int i) const { return p_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& probs() const { return p_; }

  double mass(const std::vector<int>& set) const {
    double s = 0.0;
    for (int i : set) s += p_[static_cast<std::size_t>(i)];
    return s;
  }

 private:
  std::vector<double> p_;
};

// Total variation distance: (1/2) * sum |a_i - b_i|.
inline double tv_distance(const Distribution& a, const Distribution& b) {
  if (a.n() != b.n()) throw DomainMismatchError("tv_distance: domain sizes differ");
  double s = 0.0;
  for (int i = 0; i < a.n(); ++i) s += std::abs(a.prob(i) - b.prob(i));
  return 0.5 * s;
}

inline double linf_distance(const Distribution& a, const Distribution& b) {
  if (a.n() != b.n()) throw DomainMismatchError("linf_distance: domain sizes differ");
  double m = 0.0;
  for (int i = 0; i < a.n(); ++i) m = std::max(m, std::abs(a.prob(i) - b.prob(i)));
  return m;
}

// Full-support smoothing: p_i -> 1/n^2 + (1 - 1/n) p_i, renormalized.
// Moves the input by at most 2/n in total variation and makes every
// probability at least 1/n^2.
inline Distribution smooth(const Distribution& mu) {
  int n = mu.n();
  double base = 1.0 / (static_cast<double>(n) * n);
  double keep = 1.0 - 1.0 / n;
  std::vector<double> q(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) q[static_cast<std::size_t>(i)] = base + keep * mu.prob(i);
  double sum = std::accumulate(q.begin(), q.end(), 0.0);
  for (double& v : q) v /= sum;
  return Distribution(std::move(q));
}

inline Distribution make_uniform(int n) {
  if (n < 1) throw DomainMismatchError("uniform: n must be >= 1");
  return Distribution(std::vector<double>(static_cast<std::size_t>(n), 1.0 / n));
}

// Mass 2/n on each of the first n/2 elements, zero elsewhere. Requires even n.
inline Distribution make_halfheavy(int n) {
  if (n < 2 || n % 2 != 0) throw DomainMismatchError("halfheavy: n must be even and >= 2");
  std::vector<double> p(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n / 2; ++i) p[static_cast<std::size_t>(i)] = 2.0 / n;
  return Distribution(std::move(p));
}

// p_i proportional to (i+1)^(-s).
inline Distribution make_zipf(int n, double s) {
  if (n < 1) throw DomainMismatchError("zipf: n must be >= 1");
  std::vector<double> p(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    p[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i) + 1.0, -s);
    sum += p[static_cast<std::size_t>(i)];
  }
  for (double& v : p) v /= sum;
  return Distribution(std::move(p));
}

// Point mass on element i (0-based).
inline Distribution make_pointmass(int n, int i) {
  if (n < 1 || i < 0 || i >= n) throw DomainMismatchError("pointmass: index out of range");
  std::vector<double> p(static_cast<std::size_t>(n), 0.0);
  p[static_cast<std::size_t>(i)] = 1.0;
  return Distribution(std::move(p));
}

}  // namespace condtest
