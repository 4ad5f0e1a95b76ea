#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "condtest/adaptive.hpp"
#include "condtest/bucketing.hpp"
#include "condtest/distribution.hpp"
#include "condtest/oracle.hpp"
#include "condtest/rng.hpp"

namespace condtest {

namespace detail {

// Uniformly random s-subset of {0..n-1} (partial Fisher-Yates), sorted.
inline std::vector<int> random_subset(int n, int s, RngStream& rng) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < s; ++i) {
    std::uint64_t j = static_cast<std::uint64_t>(i) +
                      rng.below(static_cast<std::uint64_t>(n - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(s));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace detail

struct NonAdaptiveParams {
  double eps = 0.1;
  double scale = 1.0;
  PrimitiveMode mode = PrimitiveMode::empirical;
  // Replaces the computed [j_min, j_max] collision window. Test hook: the
  // computed j_min exceeds log2(n) for any domain that fits in memory, so the
  // collision stage is only reachable through this override.
  std::optional<std::pair<int, int>> collision_window_override;
};

// Every conditioning set one near-uniformity run will use, fixed before the
// first draw. Construction touches no oracle.
struct NonAdaptivePlan {
  int n = 0;
  double eps = 0.0;
  std::vector<std::vector<int>> collision_sets;  // U_j, birthday stage
  std::int64_t collision_samples = 0;            // draws per U_j
  std::vector<int> small_set;                    // U, identity stage
  double small_set_distance = 0.0;               // eps/(24 |U|)
};

// Near-uniformity plan: U_j of size min(n, 2^j) for j in
// [ceil(log2(2000 eps^-6 ln^5 n)), ceil(log2 n)] (legal when empty), each
// drawn from ceil(scale 64 eps^-2 ln^2 n) times; plus one set U of size
// min(n, ceil(scale 9000 eps^-6 ln^5 n)) for an identity check at distance
// eps/(24 |U|).
inline NonAdaptivePlan make_near_uniformity_plan(int n, const NonAdaptiveParams& params,
                                                 RngStream& rng) {
  NonAdaptivePlan plan;
  plan.n = n;
  plan.eps = params.eps;
  double eps = params.eps;
  double ln_n = std::log(static_cast<double>(n));
  int j_min, j_max;
  if (params.collision_window_override) {
    j_min = params.collision_window_override->first;
    j_max = params.collision_window_override->second;
  } else {
    j_min = static_cast<int>(
        std::ceil(std::log2(2000.0 * std::pow(eps, -6.0) * std::pow(ln_n, 5.0))));
    j_max = static_cast<int>(std::ceil(std::log2(static_cast<double>(n))));
  }
  plan.collision_samples = std::max<std::int64_t>(
      1, detail::ceil_count(params.scale * 64.0 * std::pow(eps, -2.0) * ln_n * ln_n));
  for (int j = std::max(j_min, 0); j <= j_max; ++j) {
    int size = static_cast<int>(std::min<double>(n, std::pow(2.0, j)));
    plan.collision_sets.push_back(detail::random_subset(n, std::max(size, 1), rng));
  }
  double small = params.scale * 9000.0 * std::pow(eps, -6.0) * std::pow(ln_n, 5.0);
  int small_size = static_cast<int>(std::min<double>(n, std::ceil(small)));
  small_size = std::max(small_size, 1);
  plan.small_set = detail::random_subset(n, small_size, rng);
  plan.small_set_distance = eps / (24.0 * small_size);
  return plan;
}

// Executes a prepared near-uniformity plan: reject on a repeated index inside
// any U_j, then run the identity primitive restricted to U with success
// probability 19/20.
inline Verdict execute_near_uniformity_plan(CondOracle& o, const Distribution& known,
                                            const NonAdaptivePlan& plan,
                                            const NonAdaptiveParams& params) {
  Verdict v;
  SampleAccount start = o.account();
  for (std::size_t si = 0; si < plan.collision_sets.size(); ++si) {
    const std::vector<int>& u = plan.collision_sets[si];
    std::unordered_set<int> seen;
    for (std::int64_t t = 0; t < plan.collision_samples; ++t) {
      int e = o.draw(u);
      if (!seen.insert(e).second) {
        v.accept = false;
        v.usage = o.account().since(start);
        v.trace.push_back("nonadaptive: repeat in collision set " + std::to_string(si));
        return v;
      }
    }
  }
  RestrictedDistribution rknown = restrict_to(known, plan.small_set);
  RestrictedOracle ro(o, plan.small_set);
  Verdict pv = identity_primitive(ro, rknown.dist, plan.small_set_distance, 1.0 / 20.0,
                                  params.mode, params.scale);
  v.accept = pv.accept;
  v.usage = o.account().since(start);
  v.trace.push_back("nonadaptive: collision sets=" + std::to_string(plan.collision_sets.size()) +
                    " |U|=" + std::to_string(plan.small_set.size()));
  return v;
}

// Non-adaptive near-uniformity tester with fixed error probability 1/3.
// Precondition: linf(known, uniform) < eps/(8 n).
inline Verdict test_near_uniformity_nonadaptive(CondOracle& o, const Distribution& known,
                                                const NonAdaptiveParams& params, RngStream& rng) {
  if (!(params.eps > 0.0 && params.eps < 1.0))
    throw PreconditionError("eps must be in (0,1)");
  if (o.n() != known.n())
    throw DomainMismatchError("nonadaptive near-uniformity: oracle and known sizes differ");
  int n = o.n();
  if (n == 1) {
    Verdict v;
    v.accept = true;
    return v;
  }
  if (!(linf_distance(known, make_uniform(n)) < params.eps / (8.0 * n)))
    throw PreconditionError("nonadaptive near-uniformity: known distribution is not "
                            "within eps/(8 n) of uniform in linf");
  NonAdaptivePlan plan = make_near_uniformity_plan(n, params, rng);
  return execute_near_uniformity_plan(o, known, plan, params);
}

// Repetition count used to amplify a fixed-error-1/3 tester to error delta.
inline std::int64_t amplify_count(double delta, double scale = 1.0) {
  std::int64_t reps = detail::ceil_count(scale * 100.0 * std::log(1.0 / delta));
  if (reps <= 1) return 1;
  if (reps % 2 == 0) ++reps;
  return reps;
}

// Complete plan for a non-adaptive identity test: the bucket partition of the
// known distribution at eps/8 plus, for every multi-element bucket, one
// near-uniformity plan per amplification repetition. Built without touching
// the oracle; the coarse stage conditions only on the union of non-empty
// buckets, which is likewise fixed by the partition.
struct IdentityNonAdaptivePlan {
  double eps = 0.0;
  double delta = 0.0;
  BucketPartition part;
  std::int64_t reps = 0;          // amplification repetitions per bucket
  double delta_bucket = 0.0;      // per-bucket error budget
  struct BucketJob {
    int bucket = 0;
    std::vector<NonAdaptivePlan> plans;
  };
  std::vector<BucketJob> jobs;
};

inline IdentityNonAdaptivePlan make_identity_nonadaptive_plan(const Distribution& known,
                                                              double eps, double delta,
                                                              const NonAdaptiveParams& base_params,
                                                              RngStream& rng) {
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("eps must be in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("delta must be in (0,1)");
  IdentityNonAdaptivePlan plan;
  plan.eps = eps;
  plan.delta = delta;
  int n = known.n();
  plan.part = bucket(known, eps / 8.0);
  plan.delta_bucket = delta * std::log1p(eps / 8.0) / (2.0 * std::log(static_cast<double>(n)));
  plan.reps = amplify_count(plan.delta_bucket, base_params.scale);

  NonAdaptiveParams nu_params = base_params;
  nu_params.eps = eps / 2.0;
  std::uint64_t stream_index = 1;
  for (int b = 1; b <= plan.part.k(); ++b) {
    const std::vector<int>& members = plan.part.buckets[static_cast<std::size_t>(b)];
    if (members.size() < 2) continue;  // singleton buckets are vacuously uniform
    RestrictedDistribution rknown = restrict_to(known, members);
    if (!(linf_distance(rknown.dist, make_uniform(static_cast<int>(members.size()))) <
          nu_params.eps / (8.0 * static_cast<double>(members.size()))))
      throw PreconditionError("nonadaptive identity: bucket restriction violates the "
                              "near-uniformity precondition");
    IdentityNonAdaptivePlan::BucketJob job;
    job.bucket = b;
    for (std::int64_t rep = 0; rep < plan.reps; ++rep) {
      RngStream plan_rng = rng.child(stream_index++);
      job.plans.push_back(
          make_near_uniformity_plan(static_cast<int>(members.size()), nu_params, plan_rng));
    }
    plan.jobs.push_back(std::move(job));
  }
  return plan;
}

// All conditioning sets an identity plan can touch, in global coordinates:
// per-bucket collision sets and small sets (mapped through bucket membership)
// plus the union of non-empty buckets used by the coarse stage. Used by
// audits to confirm non-adaptivity.
inline std::vector<std::vector<int>> declared_sets(const IdentityNonAdaptivePlan& plan) {
  std::vector<std::vector<int>> sets;
  auto map_global = [](const std::vector<int>& members, const std::vector<int>& local) {
    std::vector<int> g;
    g.reserve(local.size());
    for (int i : local) g.push_back(members[static_cast<std::size_t>(i)]);
    std::sort(g.begin(), g.end());
    return g;
  };
  for (const auto& job : plan.jobs) {
    const std::vector<int>& members = plan.part.buckets[static_cast<std::size_t>(job.bucket)];
    for (const NonAdaptivePlan& p : job.plans) {
      for (const std::vector<int>& u : p.collision_sets) sets.push_back(map_global(members, u));
      sets.push_back(map_global(members, p.small_set));
    }
  }
  std::vector<int> coarse_union;
  for (const auto& members : plan.part.buckets)
    coarse_union.insert(coarse_union.end(), members.begin(), members.end());
  std::sort(coarse_union.begin(), coarse_union.end());
  if (!coarse_union.empty()) sets.push_back(std::move(coarse_union));
  return sets;
}

inline Verdict execute_identity_nonadaptive_plan(CondOracle& o, const Distribution& known,
                                                 const IdentityNonAdaptivePlan& plan,
                                                 const NonAdaptiveParams& base_params) {
  Verdict v;
  SampleAccount start = o.account();
  NonAdaptiveParams nu_params = base_params;
  nu_params.eps = plan.eps / 2.0;
  for (const auto& job : plan.jobs) {
    const std::vector<int>& members = plan.part.buckets[static_cast<std::size_t>(job.bucket)];
    RestrictedDistribution rknown = restrict_to(known, members);
    RestrictedOracle ro(o, members);
    std::int64_t accepts = 0;
    for (const NonAdaptivePlan& p : job.plans) {
      if (execute_near_uniformity_plan(ro, rknown.dist, p, nu_params).accept) ++accepts;
    }
    if (2 * accepts <= static_cast<std::int64_t>(job.plans.size())) {
      v.accept = false;
      v.usage = o.account().since(start);
      v.trace.push_back("nonadaptive identity: bucket " + std::to_string(job.bucket) +
                        " failed near-uniformity");
      return v;
    }
  }
  CoarsenedOracle co(o, plan.part);
  Distribution cknown = coarsen(known, plan.part);
  Verdict pv = identity_primitive(co, cknown, plan.eps / 2.0, plan.delta / 2.0, base_params.mode,
                                  base_params.scale);
  v.accept = pv.accept;
  v.usage = o.account().since(start);
  v.trace.push_back("nonadaptive identity: buckets=" + std::to_string(plan.jobs.size()) +
                    " reps=" + std::to_string(plan.reps));
  return v;
}

// Non-adaptive identity tester against a known distribution. Buckets the
// known distribution at eps/8; every multi-element bucket gets an amplified
// non-adaptive near-uniformity test at distance eps/2 and error
// delta ln(1+eps/8)/(2 ln n); the coarsened pair gets the identity primitive
// at (eps/2, delta/2). All conditioning sets are fixed before the first draw.
inline Verdict test_identity_nonadaptive(CondOracle& o, const Distribution& known, double eps,
                                         double delta, const NonAdaptiveParams& base_params,
                                         RngStream& rng) {
  if (o.n() != known.n())
    throw DomainMismatchError("nonadaptive identity: oracle and known sizes differ");
  if (o.n() == 1) {
    if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("eps must be in (0,1)");
    if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("delta must be in (0,1)");
    Verdict v;
    v.accept = true;
    return v;
  }
  IdentityNonAdaptivePlan plan =
      make_identity_nonadaptive_plan(known, eps, delta, base_params, rng);
  return execute_identity_nonadaptive_plan(o, known, plan, base_params);
}

}  // namespace condtest
