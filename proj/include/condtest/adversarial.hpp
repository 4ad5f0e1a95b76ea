#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "condtest/distribution.hpp"
#include "condtest/errors.hpp"
#include "condtest/rng.hpp"

namespace condtest {

// Uniform over the member set, zero elsewhere.
inline Distribution u_distribution(const std::vector<int>& u, int n) {
  if (u.empty()) throw DomainMismatchError("u_distribution: member set must be non-empty");
  std::vector<double> p(static_cast<std::size_t>(n), 0.0);
  double w = 1.0 / static_cast<double>(u.size());
  int prev = -1;
  for (int i : u) {
    if (i < 0 || i >= n) throw DomainMismatchError("u_distribution: index out of domain");
    if (i <= prev) throw DomainMismatchError("u_distribution: members must be sorted and unique");
    prev = i;
    p[static_cast<std::size_t>(i)] = w;
  }
  return Distribution(std::move(p));
}

enum class UniblockParity { even, odd };

// A uniform block: k drawn from [ceil(log2(n)/8), floor(3 log2(n)/8)], with a
// uniformly random support of exactly 2^(2k) (even) or 2^(2k+1) (odd)
// elements. Both parities sit at total-variation distance at least 1/2 from
// uniform, and the two parities at equal k are at least 1/2 apart even after
// relabeling.
struct UniblockDraw {
  int k = 0;
  std::vector<int> u;
  Distribution dist;
};

inline UniblockDraw gen_uniblock(int n, UniblockParity parity, RngStream& rng) {
  if (n < 2 || (n & (n - 1)) != 0)
    throw PreconditionError("gen_uniblock: n must be a power of two");
  int log_n = std::bit_width(static_cast<std::uint32_t>(n)) - 1;
  if (log_n < 8)
    throw PreconditionError("gen_uniblock: need log2(n) >= 8 for a non-empty k range");
  int k_lo = (log_n + 7) / 8;
  int k_hi = (3 * log_n) / 8;
  UniblockDraw out;
  out.k = k_lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(k_hi - k_lo + 1)));
  int size = 1 << (parity == UniblockParity::even ? 2 * out.k : 2 * out.k + 1);

  // Floyd's subset sampling: exactly uniform over size-subsets without
  // materializing the domain.
  std::set<int> chosen;
  for (int j = n - size; j < n; ++j) {
    int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(j) + 1));
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  out.u.assign(chosen.begin(), chosen.end());
  out.dist = u_distribution(out.u, n);
  return out;
}

// Concatenates a bit string with its bitwise complement, producing a balanced
// string of twice the length. Preserves Hamming distances.
inline std::string balanced_extend(const std::string& x) {
  if (x.empty()) throw PreconditionError("balanced_extend: empty input");
  std::string b = x;
  b.reserve(2 * x.size());
  for (char c : x) {
    if (c == '0')
      b.push_back('1');
    else if (c == '1')
      b.push_back('0');
    else
      throw PreconditionError("balanced_extend: input must be a 0/1 string");
  }
  return b;
}

// Distribution encoding a balanced bit string: probability 1/(2n) at zero
// positions, 3/(2n) at one positions. Balance makes the weights sum to 1.
inline Distribution string_distribution(const std::string& y) {
  std::size_t n = y.size();
  std::size_t ones = 0;
  for (char c : y) {
    if (c == '1')
      ++ones;
    else if (c != '0')
      throw PreconditionError("string_distribution: input must be a 0/1 string");
  }
  if (n == 0 || 2 * ones != n)
    throw PreconditionError("string_distribution: input must be balanced");
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i)
    p[i] = (y[i] == '1' ? 3.0 : 1.0) / (2.0 * static_cast<double>(n));
  return Distribution(std::move(p));
}

// Rejection sampler emitting elements of a query set Q with the conditional
// law of the string distribution, while probing only the bits it touches:
// pick i in Q uniformly, read its bit, emit on a one, emit with probability
// 1/3 on a zero, otherwise retry. Expected bit probes per emission stay
// below 3. Exceeding the configured probe budget raises a reduction failure.
class StringReductionSampler {
 public:
  explicit StringReductionSampler(std::string x,
                                  std::int64_t query_budget = std::numeric_limits<std::int64_t>::max())
      : x_(std::move(x)), budget_(query_budget) {
    if (x_.empty()) throw PreconditionError("reduction sampler: empty string");
    for (char c : x_)
      if (c != '0' && c != '1')
        throw PreconditionError("reduction sampler: input must be a 0/1 string");
  }

  std::int64_t queries_used() const { return used_; }

  int draw(const std::vector<int>& q, RngStream& rng) {
    if (q.empty()) throw DomainMismatchError("reduction sampler: empty query set");
    for (int i : q)
      if (i < 0 || i >= static_cast<int>(x_.size()))
        throw DomainMismatchError("reduction sampler: query index out of range");
    for (;;) {
      int i = q[static_cast<std::size_t>(rng.below(q.size()))];
      if (++used_ > budget_)
        throw ReductionFailedError("reduction sampler: bit-probe budget exhausted");
      if (x_[static_cast<std::size_t>(i)] == '1') return i;
      if (rng.uniform01() < 1.0 / 3.0) return i;
    }
  }

 private:
  std::string x_;
  std::int64_t budget_;
  std::int64_t used_ = 0;
};

}  // namespace condtest
