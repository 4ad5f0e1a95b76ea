#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "condtest/distribution.hpp"
#include "condtest/errors.hpp"
#include "condtest/rng.hpp"

namespace condtest {

// Classification of conditioning sets, used for query accounting.
//
//   full_domain     S == {0..n-1}
//   dyadic_interval S is a node interval of the balanced binary tree over the
//                   domain padded to the next power of two, truncated to [0,n)
//   constant_size   |S| at most the account's configured bound
//   general         everything else
enum class SetClass { full_domain, dyadic_interval, constant_size, general };

inline const char* set_class_name(SetClass c) {
  switch (c) {
    case SetClass::full_domain: return "full_domain";
    case SetClass::dyadic_interval: return "dyadic_interval";
    case SetClass::constant_size: return "constant_size";
    case SetClass::general: return "general";
  }
  return "?";
}

// Monotone counters of oracle usage. full_domain and dyadic_interval draws are
// counted directly; all other draws are kept as a raw |S| histogram and split
// into constant_size / general at read time using constant_size_bound, so the
// bound can be configured by the algorithm that defines it (Algorithm 1 sets
// it to 2k).
struct SampleAccount {
  std::uint64_t full_domain = 0;
  std::uint64_t dyadic_interval = 0;
  std::map<std::size_t, std::uint64_t> other_sizes;  // |S| -> draws, non-full non-dyadic
  std::map<std::size_t, std::uint64_t> size_histogram;  // |S| -> draws, every class
  std::size_t constant_size_bound = 0;

  void record(SetClass c, std::size_t set_size, std::uint64_t count) {
    size_histogram[set_size] += count;
    if (c == SetClass::full_domain) {
      full_domain += count;
    } else if (c == SetClass::dyadic_interval) {
      dyadic_interval += count;
    } else {
      other_sizes[set_size] += count;
    }
  }

  std::uint64_t total() const {
    std::uint64_t t = full_domain + dyadic_interval;
    for (const auto& [sz, c] : other_sizes) t += c;
    return t;
  }

  std::uint64_t constant_size() const {
    std::uint64_t t = 0;
    for (const auto& [sz, c] : other_sizes)
      if (sz <= constant_size_bound) t += c;
    return t;
  }

  std::uint64_t general() const {
    std::uint64_t t = 0;
    for (const auto& [sz, c] : other_sizes)
      if (sz > constant_size_bound) t += c;
    return t;
  }

  std::map<std::string, std::uint64_t> by_class() const {
    return {{"full_domain", full_domain},
            {"dyadic_interval", dyadic_interval},
            {"constant_size", constant_size()},
            {"general", general()}};
  }

  // Usage since an earlier snapshot of the same account.
  SampleAccount since(const SampleAccount& snapshot) const {
    SampleAccount d;
    d.full_domain = full_domain - snapshot.full_domain;
    d.dyadic_interval = dyadic_interval - snapshot.dyadic_interval;
    d.constant_size_bound = constant_size_bound;
    auto diff = [](const std::map<std::size_t, std::uint64_t>& now,
                   const std::map<std::size_t, std::uint64_t>& then,
                   std::map<std::size_t, std::uint64_t>& out) {
      for (const auto& [sz, c] : now) {
        std::uint64_t before = 0;
        if (auto it = then.find(sz); it != then.end()) before = it->second;
        if (c > before) out[sz] = c - before;
      }
    };
    diff(other_sizes, snapshot.other_sizes, d.other_sizes);
    diff(size_histogram, snapshot.size_histogram, d.size_histogram);
    return d;
  }
};

inline SampleAccount merge_accounts(const SampleAccount& a, const SampleAccount& b) {
  SampleAccount out = a;
  out.full_domain += b.full_domain;
  out.dyadic_interval += b.dyadic_interval;
  for (const auto& [sz, c] : b.other_sizes) out.other_sizes[sz] += c;
  for (const auto& [sz, c] : b.size_histogram) out.size_histogram[sz] += c;
  return out;
}

namespace detail {

// Sets are sorted, unique, non-empty vectors of 0-based indices.
inline void validate_set(const std::vector<int>& set, int n) {
  if (set.empty()) throw DomainMismatchError("conditioning set must be non-empty");
  int prev = -1;
  for (int i : set) {
    if (i < 0 || i >= n) throw DomainMismatchError("conditioning set index out of domain");
    if (i <= prev) throw DomainMismatchError("conditioning set must be sorted and duplicate-free");
    prev = i;
  }
}

inline bool is_contiguous(const std::vector<int>& set) {
  return set.back() - set.front() + 1 == static_cast<int>(set.size());
}

// True when S equals D intersected with [0,n) for some node interval D of the
// balanced binary tree over the domain padded to n_padded = bit_ceil(n).
// The padding is a suffix, so truncated node intervals are still contiguous.
inline bool is_dyadic_interval(const std::vector<int>& set, int n) {
  if (!is_contiguous(set)) return false;
  std::uint64_t padded = std::bit_ceil(static_cast<std::uint64_t>(n));
  std::uint64_t a = static_cast<std::uint64_t>(set.front());
  std::uint64_t b = static_cast<std::uint64_t>(set.back());
  for (std::uint64_t len = 1; len <= padded; len <<= 1) {
    if (a % len == 0 && std::min(a + len, static_cast<std::uint64_t>(n)) == b + 1) return true;
  }
  return false;
}

inline SetClass classify_set(const std::vector<int>& set, int n) {
  if (static_cast<int>(set.size()) == n) return SetClass::full_domain;
  if (is_dyadic_interval(set, n)) return SetClass::dyadic_interval;
  return SetClass::general;  // split into constant_size/general at read time
}

}  // namespace detail

// The conditional sampling interface. draw(S) returns an element of S
// distributed as mu conditioned on S; when mu(S) = 0 the element is uniform
// on S. draw_histogram(S, m) is distributed exactly as the histogram of m
// independent draw(S) calls and is accounted as m draws.
class CondOracle {
 public:
  virtual ~CondOracle() = default;

  virtual int n() const = 0;
  virtual int draw(const std::vector<int>& set) = 0;
  virtual std::vector<std::int64_t> draw_histogram(const std::vector<int>& set,
                                                   std::int64_t count) = 0;
  virtual SampleAccount& account() = 0;

  const SampleAccount& account() const {
    return const_cast<CondOracle*>(this)->account();
  }

  std::vector<int> full_set() const {
    std::vector<int> s(static_cast<std::size_t>(n()));
    for (int i = 0; i < n(); ++i) s[static_cast<std::size_t>(i)] = i;
    return s;
  }
};

// Simulated conditional oracle over an explicit distribution. Deterministic
// given (seed, call sequence). Single logical thread of use.
class SimulatedOracle final : public CondOracle {
 public:
  SimulatedOracle(Distribution mu, std::uint64_t seed)
      : mu_(std::move(mu)), rng_(seed) {
    cum_.resize(static_cast<std::size_t>(mu_.n()) + 1, 0.0);
    for (int i = 0; i < mu_.n(); ++i)
      cum_[static_cast<std::size_t>(i) + 1] = cum_[static_cast<std::size_t>(i)] + mu_.prob(i);
  }

  int n() const override { return mu_.n(); }
  SampleAccount& account() override { return account_; }
  const Distribution& mu() const { return mu_; }

  // Records every conditioning set passed to draw/draw_histogram. Test hook.
  void enable_query_log() { query_log_.emplace(); }
  const std::vector<std::vector<int>>& query_log() const { return *query_log_; }

  int draw(const std::vector<int>& set) override {
    before(set, 1);
    double total = set_mass(set);
    if (total <= 0.0) {
      // Zero-probability condition set: uniform over S by convention.
      return set[rng_.below(set.size())];
    }
    double u = rng_.uniform01() * total;
    if (detail::is_contiguous(set)) {
      // Binary search against global prefix sums.
      double base = cum_[static_cast<std::size_t>(set.front())];
      auto it = std::upper_bound(cum_.begin() + set.front() + 1,
                                 cum_.begin() + set.back() + 2, base + u);
      int idx = static_cast<int>(it - cum_.begin()) - 1;
      return std::min(idx, set.back());
    }
    double acc = 0.0;
    for (int i : set) {
      acc += mu_.prob(i);
      if (u < acc) return i;
    }
    return set.back();
  }

  std::vector<std::int64_t> draw_histogram(const std::vector<int>& set,
                                           std::int64_t count) override {
    if (count < 0) throw DomainMismatchError("draw_histogram: negative count");
    before(set, static_cast<std::uint64_t>(count));
    std::vector<std::int64_t> out(set.size(), 0);
    double total = set_mass(set);
    // Sequential binomial splitting of a multinomial. With mu(S) = 0 the
    // conditional law is uniform on S, so use unit weights.
    std::int64_t remaining = count;
    double wrem = total > 0.0 ? total : static_cast<double>(set.size());
    for (std::size_t j = 0; j + 1 < set.size() && remaining > 0; ++j) {
      double w = total > 0.0 ? mu_.prob(set[j]) : 1.0;
      double q = wrem > 0.0 ? w / wrem : 0.0;
      std::int64_t k = rng_.binomial(remaining, q);
      out[j] = k;
      remaining -= k;
      wrem -= w;
    }
    out[set.size() - 1] += remaining;
    return out;
  }

 private:
  void before(const std::vector<int>& set, std::uint64_t count) {
    detail::validate_set(set, mu_.n());
    if (query_log_) query_log_->push_back(set);
    account_.record(detail::classify_set(set, mu_.n()), set.size(), count);
  }

  double set_mass(const std::vector<int>& set) const {
    if (detail::is_contiguous(set))
      return cum_[static_cast<std::size_t>(set.back()) + 1] -
             cum_[static_cast<std::size_t>(set.front())];
    double s = 0.0;
    for (int i : set) s += mu_.prob(i);
    return s;
  }

  Distribution mu_;
  RngStream rng_;
  std::vector<double> cum_;
  SampleAccount account_;
  std::optional<std::vector<std::vector<int>>> query_log_;
};

}  // namespace condtest
