#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "condtest/distribution.hpp"
#include "condtest/errors.hpp"
#include "condtest/oracle.hpp"

namespace condtest {

// A partition of {0..n-1} into buckets M_0..M_k by probability magnitude.
// Empty buckets are kept so bucket indices are stable across inputs.
struct BucketPartition {
  int n = 0;
  double eps = 0.0;
  bool scaled = false;  // true for the eps-scaled variant
  std::vector<std::vector<int>> buckets;  // index 0..k, each sorted
  std::vector<int> bucket_of;             // element -> bucket index

  int k() const { return static_cast<int>(buckets.size()) - 1; }
  double mass(const Distribution& mu, int i) const {
    double s = 0.0;
    for (int j : buckets[static_cast<std::size_t>(i)]) s += mu.prob(j);
    return s;
  }
};

namespace detail {

// Lower edge of bucket i (i >= 1): scale * (1+eps)^(i-1) / n.
inline double bucket_edge(int i, int n, double eps, double scale) {
  return scale * std::pow(1.0 + eps, static_cast<double>(i) - 1.0) / n;
}

// Index of the half-open bucket [edge(i), edge(i+1)) containing p, for
// p >= edge(1). Computed by logarithm, then adjusted by direct comparison so
// exact boundary values land on the inclusive side.
inline int bucket_index(double p, int n, double eps, double scale) {
  double x = std::log(p * n / scale) / std::log1p(eps);
  int i = static_cast<int>(std::floor(x)) + 1;
  i = std::max(i, 1);
  while (i > 1 && bucket_edge(i, n, eps, scale) > p) --i;
  while (bucket_edge(i + 1, n, eps, scale) <= p) ++i;
  return i;
}

inline BucketPartition bucket_impl(const Distribution& mu, double eps, double scale,
                                   int k_formula, bool scaled) {
  int n = mu.n();
  BucketPartition part;
  part.n = n;
  part.eps = eps;
  part.scaled = scaled;
  part.bucket_of.resize(static_cast<std::size_t>(n));
  int k = std::max(k_formula, 0);
  std::vector<int> idx(static_cast<std::size_t>(n));
  double low = scale / n;  // lower edge of bucket 1
  for (int j = 0; j < n; ++j) {
    double p = mu.prob(j);
    int i = p < low ? 0 : bucket_index(p, n, eps, scale);
    idx[static_cast<std::size_t>(j)] = i;
    k = std::max(k, i);
  }
  part.buckets.assign(static_cast<std::size_t>(k) + 1, {});
  for (int j = 0; j < n; ++j) {
    part.bucket_of[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j)];
    part.buckets[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])].push_back(j);
  }
  return part;
}

}  // namespace detail

// Standard bucketing: M_0 = { j : mu(j) < 1/n },
// M_i = { j : (1+eps)^(i-1)/n <= mu(j) < (1+eps)^i/n }, k = ceil(ln n / ln(1+eps)),
// extended upward when the top probability needs a higher bucket.
inline BucketPartition bucket(const Distribution& mu, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("bucket: eps must be positive");
  int k_formula = static_cast<int>(std::ceil(std::log(static_cast<double>(mu.n())) / std::log1p(eps)));
  return detail::bucket_impl(mu, eps, 1.0, k_formula, false);
}

// Number of buckets used by the eps-scaled bucketing (and by the learner's
// grid): ceil(ln n * ln(1/eps) / ln^2(1+eps)).
inline int prime_bucket_count(int n, double eps) {
  double v = std::log(static_cast<double>(n)) * std::log(1.0 / eps) /
             (std::log1p(eps) * std::log1p(eps));
  return static_cast<int>(std::ceil(std::max(v, 0.0)));
}

// eps-scaled bucketing: thresholds are those of bucket() multiplied by eps,
// so M_0 = { j : mu(j) < eps/n } and bucket 1 starts at eps/n.
inline BucketPartition bucket_prime(const Distribution& mu, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("bucket_prime: eps must be positive");
  return detail::bucket_impl(mu, eps, eps, prime_bucket_count(mu.n(), eps), true);
}

// Grid value (1+eps)^(j-1) * eps / n for j >= 1; the lower edge of scaled
// bucket j and the value the trimming sampler snaps to.
inline double grid_value(int j, int n, double eps) {
  return detail::bucket_edge(j, n, eps, eps);
}

// mu conditioned on M, re-indexed over {0..|M|-1}. members[i] is the original
// index of restricted element i.
struct RestrictedDistribution {
  Distribution dist;
  std::vector<int> members;
};

inline RestrictedDistribution restrict_to(const Distribution& mu, const std::vector<int>& members) {
  detail::validate_set(members, mu.n());
  double total = mu.mass(members);
  if (total <= 0.0) throw ZeroMassError("restrict_to: set has zero probability");
  std::vector<double> p;
  p.reserve(members.size());
  for (int i : members) p.push_back(mu.prob(i) / total);
  return {Distribution(std::move(p)), members};
}

// The distribution of bucket indices: entry i is mu(M_i), over {0..k}.
inline Distribution coarsen(const Distribution& mu, const BucketPartition& part) {
  if (part.n != mu.n()) throw DomainMismatchError("coarsen: partition built for different n");
  std::vector<double> p(part.buckets.size(), 0.0);
  for (std::size_t i = 0; i < part.buckets.size(); ++i) p[i] = part.mass(mu, static_cast<int>(i));
  return Distribution(std::move(p));
}

// Oracle over {0..|M|-1} that forwards draws conditioned within M. Accounting
// flows to the parent oracle.
class RestrictedOracle final : public CondOracle {
 public:
  RestrictedOracle(CondOracle& base, std::vector<int> members)
      : base_(base), members_(std::move(members)) {
    detail::validate_set(members_, base_.n());
  }

  int n() const override { return static_cast<int>(members_.size()); }
  SampleAccount& account() override { return base_.account(); }

  int draw(const std::vector<int>& set) override {
    int g = base_.draw(map_up(set));
    auto it = std::lower_bound(members_.begin(), members_.end(), g);
    return static_cast<int>(it - members_.begin());
  }

  std::vector<std::int64_t> draw_histogram(const std::vector<int>& set,
                                           std::int64_t count) override {
    return base_.draw_histogram(map_up(set), count);  // order preserved
  }

 private:
  std::vector<int> map_up(const std::vector<int>& set) const {
    detail::validate_set(set, n());
    std::vector<int> g;
    g.reserve(set.size());
    for (int i : set) g.push_back(members_[static_cast<std::size_t>(i)]);
    return g;
  }

  CondOracle& base_;
  std::vector<int> members_;
};

// Oracle over bucket indices {0..k}: a draw conditioned on a set T of buckets
// is one parent draw conditioned on the union of those buckets, mapped back to
// its bucket index.
class CoarsenedOracle final : public CondOracle {
 public:
  CoarsenedOracle(CondOracle& base, BucketPartition part)
      : base_(base), part_(std::move(part)) {
    if (base_.n() != part_.n)
      throw DomainMismatchError("coarsened oracle: partition built for different n");
  }

  int n() const override { return static_cast<int>(part_.buckets.size()); }
  SampleAccount& account() override { return base_.account(); }

  int draw(const std::vector<int>& set) override {
    int g = base_.draw(union_of(set));
    return part_.bucket_of[static_cast<std::size_t>(g)];
  }

  std::vector<std::int64_t> draw_histogram(const std::vector<int>& set,
                                           std::int64_t count) override {
    std::vector<int> u = union_of(set);
    std::vector<std::int64_t> h = base_.draw_histogram(u, count);
    std::vector<std::int64_t> out(set.size(), 0);
    for (std::size_t j = 0; j < u.size(); ++j) {
      int b = part_.bucket_of[static_cast<std::size_t>(u[j])];
      auto it = std::lower_bound(set.begin(), set.end(), b);
      out[static_cast<std::size_t>(it - set.begin())] += h[j];
    }
    return out;
  }

 private:
  std::vector<int> union_of(const std::vector<int>& set) const {
    detail::validate_set(set, n());
    std::vector<int> u;
    for (int b : set)
      u.insert(u.end(), part_.buckets[static_cast<std::size_t>(b)].begin(),
               part_.buckets[static_cast<std::size_t>(b)].end());
    std::sort(u.begin(), u.end());
    if (u.empty())
      throw PreconditionError("coarsened draw: selected buckets are all empty");
    return u;
  }

  CondOracle& base_;
  BucketPartition part_;
};

}  // namespace condtest
