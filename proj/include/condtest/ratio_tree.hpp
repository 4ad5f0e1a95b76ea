#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "condtest/bucketing.hpp"
#include "condtest/distribution.hpp"
#include "condtest/errors.hpp"
#include "condtest/oracle.hpp"
#include "condtest/rng.hpp"

namespace condtest {

namespace detail {

// Heap-indexed balanced tree over a power-of-two padded domain: root is node
// 1, children of u are 2u and 2u+1, leaves are [n_padded, 2 n_padded).
inline int padded_size(int n) {
  return static_cast<int>(std::bit_ceil(static_cast<std::uint64_t>(n)));
}

inline std::pair<int, int> node_interval(int node, int n_padded) {
  int depth = std::bit_width(static_cast<std::uint32_t>(node)) - 1;
  int size = n_padded >> depth;
  int lo = (node - (1 << depth)) * size;
  return {lo, lo + size};
}

// Node interval clipped to the real domain [0, n). Empty for fully padded
// nodes, which descent can never reach (their parents estimate ratio 1).
inline std::vector<int> truncated_interval(int node, int n_padded, int n) {
  auto [lo, hi] = node_interval(node, n_padded);
  hi = std::min(hi, n);
  std::vector<int> set;
  if (lo >= hi) return set;
  set.resize(static_cast<std::size_t>(hi - lo));
  std::iota(set.begin(), set.end(), lo);
  return set;
}

// Largest j >= 1 with (1+eps)^{j-1} eps/n <= eta. Requires eta >= eps/n.
inline int eta_grid_index(double eta, int n, double eps) {
  double raw = std::log(eta * n / eps) / std::log1p(eps) + 1.0;
  int j = std::max(1, static_cast<int>(std::floor(raw)));
  while (grid_value(j + 1, n, eps) <= eta) ++j;
  while (j > 1 && grid_value(j, n, eps) > eta) --j;
  return j;
}

}  // namespace detail

// Result of one sampler run: an element with its claimed probability (the
// product of the ratio factors along the root-to-leaf path), or a trimmed
// sentinel. Raw runs may land on a zero-probability padding leaf; the padded
// flag marks those, and the trimming layer maps them to the sentinel.
struct ExplicitSample {
  bool trimmed = false;
  int i = -1;
  bool padded = false;
  double eta = 0.0;
  int j = 0;  // probability-grid index, trimming runs only
};

// Estimates mu(L)/(mu(L)+mu(R)) for an internal node from
// t = ceil(scale 2 eps^-2 ln(1/delta)) draws conditioned on the node's
// interval: the fraction that lands in the left half. Zero-mass intervals
// fall back to the oracle's uniform convention, giving roughly |L|/(|L|+|R|).
inline double estimate_ratio(CondOracle& o, int node, double eps, double delta,
                             double scale = 1.0) {
  int n_padded = detail::padded_size(o.n());
  if (node < 1 || node >= n_padded)
    throw PreconditionError("estimate_ratio: node must be internal");
  std::vector<int> set = detail::truncated_interval(node, n_padded, o.n());
  if (set.empty()) throw PreconditionError("estimate_ratio: fully padded node");
  std::int64_t t =
      std::max<std::int64_t>(1, detail::ceil_count(scale * 2.0 * std::pow(eps, -2.0) *
                                                   std::log(1.0 / delta)));
  int mid = (detail::node_interval(node, n_padded).first +
             detail::node_interval(node, n_padded).second) / 2;
  std::vector<std::int64_t> counts = o.draw_histogram(set, t);
  std::int64_t left = 0;
  for (std::size_t idx = 0; idx < set.size(); ++idx)
    if (set[idx] < mid) left += counts[idx];
  return static_cast<double>(left) / static_cast<double>(t);
}

// Exact left-mass ratios for every internal node of the padded tree over mu;
// zero-mass nodes get the conventional 1/2. Indexed by node, entries 0 and
// the leaf range unused.
inline std::vector<double> exact_alpha(const Distribution& mu) {
  int n_padded = detail::padded_size(mu.n());
  std::vector<double> mass(static_cast<std::size_t>(2 * n_padded), 0.0);
  for (int i = 0; i < mu.n(); ++i) mass[static_cast<std::size_t>(n_padded + i)] = mu.prob(i);
  for (int u = n_padded - 1; u >= 1; --u)
    mass[static_cast<std::size_t>(u)] =
        mass[static_cast<std::size_t>(2 * u)] + mass[static_cast<std::size_t>(2 * u + 1)];
  std::vector<double> alpha(static_cast<std::size_t>(2 * n_padded), 0.5);
  for (int u = 1; u < n_padded; ++u) {
    double m = mass[static_cast<std::size_t>(u)];
    if (m > 0.0) alpha[static_cast<std::size_t>(u)] = mass[static_cast<std::size_t>(2 * u)] / m;
  }
  return alpha;
}

// Distribution over the padded domain whose leaf probabilities are the
// root-to-leaf products of alpha / (1-alpha) factors. Inverse of exact_alpha
// up to floating error.
inline Distribution reconstitute(const std::vector<double>& alpha, int n_padded) {
  if (n_padded < 1 || (n_padded & (n_padded - 1)) != 0)
    throw PreconditionError("reconstitute: padded size must be a power of two");
  if (static_cast<int>(alpha.size()) < 2 * n_padded && n_padded > 1)
    throw PreconditionError("reconstitute: alpha vector too short");
  std::vector<double> mass(static_cast<std::size_t>(2 * n_padded), 0.0);
  mass[1] = 1.0;
  for (int u = 1; u < n_padded; ++u) {
    double a = alpha[static_cast<std::size_t>(u)];
    if (!(a >= 0.0 && a <= 1.0))
      throw PreconditionError("reconstitute: alpha must be defined on all internal nodes");
    mass[static_cast<std::size_t>(2 * u)] = mass[static_cast<std::size_t>(u)] * a;
    mass[static_cast<std::size_t>(2 * u + 1)] = mass[static_cast<std::size_t>(u)] * (1.0 - a);
  }
  return Distribution(std::vector<double>(mass.begin() + n_padded, mass.end()));
}

struct SamplerParams {
  double eps = 0.1;
  double delta = 0.1;
  std::int64_t s = 1;  // maximum runs the session supports
  double scale = 1.0;
};

// Persistent sampler session: walks the ratio tree root to leaf, estimating
// each visited node's left-mass ratio once and memoizing it, so the session's
// runs are mutually consistent with a single reconstituted distribution.
// Descent decisions use session randomness, never the oracle.
class PersistentSampler {
 public:
  PersistentSampler(CondOracle& o, SamplerParams params, RngStream rng)
      : o_(o), params_(params), rng_(rng), n_(o.n()), n_padded_(detail::padded_size(o.n())),
        alpha_(static_cast<std::size_t>(2 * n_padded_), kUnset) {
    if (!(params_.eps > 0.0 && params_.eps < 1.0))
      throw PreconditionError("sampler eps must be in (0,1)");
    if (!(params_.delta > 0.0 && params_.delta < 1.0))
      throw PreconditionError("sampler delta must be in (0,1)");
    if (params_.s < 1) throw PreconditionError("sampler run budget must be positive");
  }

  // Cloning would fork the memoization state and break run consistency.
  PersistentSampler(const PersistentSampler&) = delete;
  PersistentSampler& operator=(const PersistentSampler&) = delete;

  int n_padded() const { return n_padded_; }
  std::int64_t runs_used() const { return runs_used_; }
  int depth() const { return std::bit_width(static_cast<std::uint32_t>(n_padded_)) - 1; }

  double per_node_precision() const {
    double base = params_.eps / (2.0 * depth());
    return base * base;
  }
  double per_node_error() const { return params_.delta / (static_cast<double>(params_.s) * depth()); }
  std::int64_t node_sample_count() const {
    return std::max<std::int64_t>(
        1, detail::ceil_count(params_.scale * 2.0 * std::pow(per_node_precision(), -2.0) *
                              std::log(1.0 / per_node_error())));
  }

  // Conditional-query ceiling for one run: the closed-form budget
  // scale 2^5 eps^-4 depth^5 ln(s depth / delta) plus one per-node rounding
  // slack for each level.
  std::int64_t per_run_query_bound() const {
    if (n_padded_ == 1) return 0;
    double l = depth();
    double formula = params_.scale * 32.0 * std::pow(params_.eps, -4.0) * std::pow(l, 5.0) *
                     std::log(static_cast<double>(params_.s) * l / params_.delta);
    return detail::ceil_count(formula) + depth();
  }

  // Replaces every ratio with its exact value under mu. Test hook: turns the
  // session into a deterministic sampler for mu with eta = mu(i) exactly.
  void inject_exact_alpha(const Distribution& mu) {
    if (mu.n() != n_) throw DomainMismatchError("inject_exact_alpha: size mismatch");
    alpha_ = exact_alpha(mu);
  }

  const std::vector<double>& path_factors() const { return last_factors_; }

  // One raw run: returns a leaf with the product of its path factors.
  ExplicitSample run() {
    if (runs_used_ >= params_.s)
      throw SessionExhaustedError("persistent sampler: session run budget exhausted");
    ++runs_used_;
    last_factors_.clear();
    ExplicitSample out;
    if (n_padded_ == 1) {
      out.i = 0;
      out.eta = 1.0;
      return out;
    }
    int u = 1;
    double eta = 1.0;
    while (u < n_padded_) {
      double a = node_alpha(u);
      double factor;
      if (rng_.uniform01() < a) {
        u = 2 * u;
        factor = a;
      } else {
        u = 2 * u + 1;
        factor = 1.0 - a;
      }
      eta *= factor;
      last_factors_.push_back(factor);
    }
    out.i = u - n_padded_;
    out.padded = out.i >= n_;
    out.eta = eta;
    return out;
  }

  // Trimming layer: maps a raw run to the sentinel when any path factor falls
  // below eps/(2 depth), the claimed probability falls below eps/n, or the
  // leaf is padding; otherwise snaps eta down to the probability grid and
  // keeps the sample with probability snapped/eta.
  ExplicitSample run_trimming() {
    ExplicitSample raw = run();
    ExplicitSample out;
    out.trimmed = true;
    if (raw.padded) return out;
    if (n_padded_ > 1) {
      double threshold = params_.eps / (2.0 * depth());
      for (double f : last_factors_)
        if (f < threshold) return out;
    }
    if (raw.eta < params_.eps / static_cast<double>(n_)) return out;
    int j = detail::eta_grid_index(raw.eta, n_, params_.eps);
    double snapped = grid_value(j, n_, params_.eps);
    if (rng_.uniform01() < snapped / raw.eta) {
      out.trimmed = false;
      out.i = raw.i;
      out.eta = snapped;
      out.j = j;
    }
    return out;
  }

 private:
  static constexpr double kUnset = -1.0;

  double node_alpha(int u) {
    double& slot = alpha_[static_cast<std::size_t>(u)];
    if (slot == kUnset)
      slot = estimate_ratio(o_, u, per_node_precision(), per_node_error(), params_.scale);
    return slot;
  }

  CondOracle& o_;
  SamplerParams params_;
  RngStream rng_;
  int n_;
  int n_padded_;
  std::vector<double> alpha_;
  std::vector<double> last_factors_;
  std::int64_t runs_used_ = 0;
};

// Deterministic reference for the trimming layer. Zeroes every blocked or
// below-threshold entry, snaps the rest down to the probability grid, and
// books the removed mass on a sentinel prepended as index 0.
struct TrimResult {
  Distribution trimmed;        // n+1 entries; index 0 is the sentinel
  Distribution renormalized;   // surviving entries, renormalized over [n]
  std::vector<int> grid_index; // per element; 0 marks a trimmed entry
};

inline TrimResult trim_exact(const Distribution& mu_tilde, const std::vector<int>& blocked,
                             double eps) {
  int n = mu_tilde.n();
  std::vector<bool> is_blocked(static_cast<std::size_t>(n), false);
  for (int b : blocked) {
    if (b < 0 || b >= n) throw DomainMismatchError("trim_exact: blocked index out of domain");
    is_blocked[static_cast<std::size_t>(b)] = true;
  }
  std::vector<double> trimmed(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> grid_index(static_cast<std::size_t>(n), 0);
  double kept = 0.0;
  for (int i = 0; i < n; ++i) {
    double p = mu_tilde.prob(i);
    if (is_blocked[static_cast<std::size_t>(i)] || p < eps / static_cast<double>(n)) continue;
    int j = detail::eta_grid_index(p, n, eps);
    double snapped = grid_value(j, n, eps);
    trimmed[static_cast<std::size_t>(i) + 1] = snapped;
    grid_index[static_cast<std::size_t>(i)] = j;
    kept += snapped;
  }
  trimmed[0] = std::max(0.0, 1.0 - kept);
  TrimResult out;
  out.trimmed = Distribution(trimmed);
  if (kept <= 0.0)
    throw ZeroMassError("trim_exact: every entry was trimmed, no renormalized distribution");
  std::vector<double> renorm(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    renorm[static_cast<std::size_t>(i)] = trimmed[static_cast<std::size_t>(i) + 1] / kept;
  out.renormalized = Distribution(renorm);
  out.grid_index = std::move(grid_index);
  return out;
}

}  // namespace condtest
