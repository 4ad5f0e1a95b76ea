#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "condtest/adaptive.hpp"
#include "condtest/bucketing.hpp"
#include "condtest/distribution.hpp"
#include "condtest/oracle.hpp"
#include "condtest/ratio_tree.hpp"
#include "condtest/rng.hpp"

namespace condtest {

// Integer bucket sizes m_0..m_k on the eps-probability grid. The zero index
// collects elements claimed to carry no grid mass.
struct GridCounts {
  double eps = 0.0;
  int k = 0;
  std::vector<std::int64_t> m;
  bool failed = false;
};

// Separate knobs for the two sample-count formulas a learning run combines:
// the number of sampler draws and the per-node budget of the ratio estimates
// beneath them.
struct LearnScale {
  double samples = 1.0;
  double estimator = 1.0;
};

struct LearnResult {
  Distribution dist;
  GridCounts counts;
  SampleAccount usage;
  bool uniform_fallback = false;  // every sample was trimmed
};

// Distribution with m_0 zero entries followed by m_j copies of the grid value
// (1+eps)^{j-1} eps/n in ascending j order, normalized. All-zero layouts fall
// back to uniform.
inline Distribution tentative_distribution(const GridCounts& counts, int n) {
  if (counts.m.empty()) throw PreconditionError("tentative distribution: empty counts");
  std::int64_t sum = 0;
  for (std::int64_t v : counts.m) {
    if (v < 0) throw PreconditionError("tentative distribution: negative count");
    sum += v;
  }
  if (sum != n) throw PreconditionError("tentative distribution: counts must sum to n");
  std::vector<double> r;
  r.reserve(static_cast<std::size_t>(n));
  r.insert(r.end(), static_cast<std::size_t>(counts.m[0]), 0.0);
  for (int j = 1; j < static_cast<int>(counts.m.size()); ++j)
    r.insert(r.end(), static_cast<std::size_t>(counts.m[static_cast<std::size_t>(j)]),
             grid_value(j, n, counts.eps));
  double total = std::accumulate(r.begin(), r.end(), 0.0);
  if (total <= 0.0) return make_uniform(n);
  for (double& v : r) v /= total;
  return Distribution(std::move(r));
}

// Rounds n alpha_j to integers (exact halves round down), then repairs an
// overshoot by decrementing the smallest-index positive entry until the sizes
// fit in n; index 0 absorbs the slack. The repair marks the counts failed if
// it ever decrements a grid level of value at least eps/k.
inline GridCounts bucketize(const std::vector<double>& alpha, int n, double eps, int k) {
  if (static_cast<int>(alpha.size()) != k + 1)
    throw PreconditionError("bucketize: alpha must have k+1 entries");
  double sum = 0.0;
  for (double a : alpha) {
    if (a < -1e-12) throw PreconditionError("bucketize: negative fraction");
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw PreconditionError("bucketize: fractions must sum to 1");
  GridCounts out;
  out.eps = eps;
  out.k = k;
  out.m.assign(static_cast<std::size_t>(k) + 1, 0);
  std::int64_t used = 0;
  for (int j = 1; j <= k; ++j) {
    double x = static_cast<double>(n) * alpha[static_cast<std::size_t>(j)];
    std::int64_t v = static_cast<std::int64_t>(std::ceil(x - 0.5));
    if (v < 0) v = 0;
    out.m[static_cast<std::size_t>(j)] = v;
    used += v;
  }
  while (used > n) {
    for (int j = 1; j <= k; ++j) {
      if (out.m[static_cast<std::size_t>(j)] > 0) {
        --out.m[static_cast<std::size_t>(j)];
        --used;
        if (grid_value(j, n, eps) >= eps / static_cast<double>(k)) out.failed = true;
        break;
      }
    }
  }
  out.m[0] = n - used;
  return out;
}

// Learns an unknown distribution up to relabeling: s trimming-sampler draws
// at grid parameter eps/12 are tallied per grid level, converted to
// count fractions s_j / (s n g_j), bucketized, and laid out as a tentative
// distribution. Guarantee at unit scales: some permutation of the output is
// eps-close to the unknown distribution with probability 1-delta.
// `inject_exact` replaces the session's ratio estimates with their exact
// values under the given distribution, isolating the tally and rounding
// pipeline from estimation noise. Test hook.
inline LearnResult learn_distribution(CondOracle& o, double eps, double delta,
                                      const LearnScale& scale, RngStream rng,
                                      const std::optional<Distribution>& inject_exact =
                                          std::nullopt) {
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("eps must be in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("delta must be in (0,1)");
  int n = o.n();
  LearnResult out;
  double eps_grid = eps / 12.0;
  if (n == 1) {
    out.dist = make_uniform(1);
    out.counts.eps = eps_grid;
    out.counts.k = 0;
    out.counts.m = {1};
    return out;
  }
  SampleAccount start = o.account();
  double ln_n = std::log(static_cast<double>(n));
  std::int64_t s = std::max<std::int64_t>(
      1, detail::ceil_count(scale.samples * 4096.0 * std::pow(eps, -4.0) * ln_n * ln_n *
                            std::log(1.0 / delta)));
  int k = prime_bucket_count(n, eps_grid);

  SamplerParams sp;
  sp.eps = eps_grid;
  sp.delta = delta / 2.0;
  sp.s = s;
  sp.scale = scale.estimator;
  PersistentSampler session(o, sp, rng.child(0));
  if (inject_exact) session.inject_exact_alpha(*inject_exact);

  std::vector<std::int64_t> tally(static_cast<std::size_t>(k) + 1, 0);
  for (std::int64_t i = 0; i < s; ++i) {
    ExplicitSample smp = session.run_trimming();
    if (smp.trimmed) {
      ++tally[0];
      continue;
    }
    if (smp.j < 1 || smp.j > k)
      throw Error("learner: grid index outside the bucket range");
    ++tally[static_cast<std::size_t>(smp.j)];
  }

  // A level's sample share estimates m_j g_j, the trimmed mass it carries;
  // dividing by n g_j converts it to the fraction of the domain sitting at
  // that level, which is what the rounding step needs.
  std::vector<double> alpha(static_cast<std::size_t>(k) + 1, 0.0);
  double sum = 0.0;
  for (int j = 1; j <= k; ++j) {
    double g = grid_value(j, n, eps_grid);
    alpha[static_cast<std::size_t>(j)] = static_cast<double>(tally[static_cast<std::size_t>(j)]) /
                                         (static_cast<double>(s) * static_cast<double>(n) * g);
    sum += alpha[static_cast<std::size_t>(j)];
  }
  if (sum > 1.0) {
    for (int j = 1; j <= k; ++j) alpha[static_cast<std::size_t>(j)] /= sum;
    alpha[0] = 0.0;
  } else {
    alpha[0] = 1.0 - sum;
  }

  out.counts = bucketize(alpha, n, eps_grid, k);
  out.dist = tentative_distribution(out.counts, n);
  out.uniform_fallback = (out.counts.m[0] == n);
  out.usage = o.account().since(start);
  return out;
}

// Smallest total-variation distance achievable by relabeling one side:
// sorting both probability vectors in descending order aligns heaviest with
// heaviest, which is optimal.
inline double min_permutation_tv(const Distribution& a, const Distribution& b) {
  if (a.n() != b.n()) throw DomainMismatchError("min_permutation_tv: size mismatch");
  std::vector<double> pa = a.probs();
  std::vector<double> pb = b.probs();
  std::sort(pa.begin(), pa.end(), std::greater<double>());
  std::sort(pb.begin(), pb.end(), std::greater<double>());
  double l1 = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) l1 += std::abs(pa[i] - pb[i]);
  return l1 / 2.0;
}

// Distance callbacks for label-invariant testing.
inline double uniformity_distance(const Distribution& d) {
  return min_permutation_tv(d, make_uniform(d.n()));
}

// Distance to the nearest distribution that is uniform on a support whose
// size is a power of four.
inline double pow4_support_distance(const Distribution& d) {
  std::vector<double> p = d.probs();
  std::sort(p.begin(), p.end(), std::greater<double>());
  double best = 1.0;
  for (std::int64_t m = 1; m <= d.n(); m *= 4) {
    double l1 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      double target = static_cast<std::int64_t>(i) < m ? 1.0 / static_cast<double>(m) : 0.0;
      l1 += std::abs(p[i] - target);
    }
    best = std::min(best, l1 / 2.0);
  }
  return best;
}

// Universal tester for label-invariant properties: learns the distribution at
// eps/2 and accepts when the supplied distance-to-property callback rates the
// learned distribution within the threshold (eps/2 unless a tolerant caller
// widens it).
inline Verdict test_label_invariant(CondOracle& o,
                                    const std::function<double(const Distribution&)>& prop_dist,
                                    double eps, double delta, const LearnScale& scale,
                                    RngStream rng,
                                    std::optional<double> accept_threshold = std::nullopt) {
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("eps must be in (0,1)");
  LearnResult learned = learn_distribution(o, eps / 2.0, delta, scale, rng);

  // Spot-check the caller's obligation that the distance is label-invariant.
  std::vector<double> perm = learned.dist.probs();
  std::reverse(perm.begin(), perm.end());
  double direct = prop_dist(learned.dist);
  if (std::abs(direct - prop_dist(Distribution(perm))) > 1e-9)
    throw PreconditionError("property distance is not label-invariant");

  double threshold = accept_threshold.value_or(eps / 2.0);
  Verdict v;
  v.accept = direct <= threshold;
  v.usage = learned.usage;
  v.trace.push_back("label-invariant: distance=" + std::to_string(direct) +
                    " threshold=" + std::to_string(threshold));
  return v;
}

// Tests whether two unknown distributions coincide up to a relabeling of the
// domain: learn both at eps/4, accept when the sorted forms are eps/2-close.
inline Verdict test_identity_up_to_relabeling(CondOracle& o1, CondOracle& o2, double eps,
                                              double delta, const LearnScale& scale,
                                              RngStream rng) {
  if (o1.n() != o2.n())
    throw DomainMismatchError("identity up to relabeling: domain sizes differ");
  LearnResult a = learn_distribution(o1, eps / 4.0, delta / 2.0, scale, rng.child(1));
  LearnResult b = learn_distribution(o2, eps / 4.0, delta / 2.0, scale, rng.child(2));
  double dist = min_permutation_tv(a.dist, b.dist);
  Verdict v;
  v.accept = dist <= eps / 2.0;
  v.usage = merge_accounts(a.usage, b.usage);
  v.trace.push_back("relabeling identity: sorted distance=" + std::to_string(dist));
  return v;
}

}  // namespace condtest
