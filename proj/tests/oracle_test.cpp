#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "condtest/distribution.hpp"
#include "condtest/errors.hpp"
#include "condtest/oracle.hpp"
#include "condtest/rng.hpp"

namespace {

using condtest::Distribution;
using condtest::DomainMismatchError;
using condtest::make_pointmass;
using condtest::make_uniform;
using condtest::RngStream;
using condtest::SampleAccount;
using condtest::SetClass;
using condtest::SimulatedOracle;
using condtest::detail::classify_set;
using condtest::detail::is_dyadic_interval;

TEST(SetClassification, FullDomain) {
  EXPECT_EQ(classify_set({0, 1, 2, 3}, 4), SetClass::full_domain);
  // Full domain wins over dyadic even when n is a power of two.
  EXPECT_EQ(classify_set({0, 1, 2, 3, 4, 5, 6, 7}, 8), SetClass::full_domain);
}

TEST(SetClassification, DyadicIntervals) {
  // n = 8: node intervals are {0..7}, {0..3}, {4..7}, {0,1}, ... singletons.
  EXPECT_EQ(classify_set({0, 1, 2, 3}, 8), SetClass::dyadic_interval);
  EXPECT_EQ(classify_set({4, 5, 6, 7}, 8), SetClass::dyadic_interval);
  EXPECT_EQ(classify_set({2, 3}, 8), SetClass::dyadic_interval);
  EXPECT_EQ(classify_set({5}, 8), SetClass::dyadic_interval);
  // Aligned to 2 but wrong length, or misaligned: general.
  EXPECT_EQ(classify_set({1, 2}, 8), SetClass::general);
  EXPECT_EQ(classify_set({0, 1, 2}, 8), SetClass::general);
  EXPECT_EQ(classify_set({2, 5}, 8), SetClass::general);
}

TEST(SetClassification, TruncatedDyadicIntervals) {
  // n = 6 pads to 8. The node covering {4..7} truncates to {4, 5}; the node
  // covering {0..7} truncates to the full domain and is classified as such.
  EXPECT_TRUE(is_dyadic_interval({4, 5}, 6));
  EXPECT_EQ(classify_set({4, 5}, 6), SetClass::dyadic_interval);
  EXPECT_EQ(classify_set({0, 1, 2, 3}, 6), SetClass::dyadic_interval);
  EXPECT_EQ(classify_set({0, 1, 2, 3, 4, 5}, 6), SetClass::full_domain);
  // {4, 5, 6} is the truncation of {4..7} for n = 7, and {4, 5} is the
  // untruncated node below it; {5, 6} starts at an odd offset and is no
  // node's truncation.
  EXPECT_EQ(classify_set({4, 5, 6}, 7), SetClass::dyadic_interval);
  EXPECT_EQ(classify_set({4, 5}, 7), SetClass::dyadic_interval);
  EXPECT_EQ(classify_set({5, 6}, 7), SetClass::general);
}

TEST(Account, RecordsAndSplitsByBound) {
  SampleAccount acc;
  acc.record(SetClass::full_domain, 10, 3);
  acc.record(SetClass::dyadic_interval, 4, 2);
  acc.record(SetClass::general, 5, 7);
  acc.record(SetClass::general, 40, 1);
  EXPECT_EQ(acc.total(), 13u);

  acc.constant_size_bound = 5;
  auto by = acc.by_class();
  EXPECT_EQ(by["full_domain"], 3u);
  EXPECT_EQ(by["dyadic_interval"], 2u);
  EXPECT_EQ(by["constant_size"], 7u);
  EXPECT_EQ(by["general"], 1u);

  std::uint64_t sum = 0;
  for (const auto& [name, c] : by) sum += c;
  EXPECT_EQ(sum, acc.total());
}

TEST(Account, SinceComputesDeltas) {
  SampleAccount acc;
  acc.record(SetClass::full_domain, 8, 5);
  SampleAccount snap = acc;
  acc.record(SetClass::full_domain, 8, 2);
  acc.record(SetClass::general, 3, 4);
  SampleAccount d = acc.since(snap);
  EXPECT_EQ(d.full_domain, 2u);
  EXPECT_EQ(d.total(), 6u);
}

TEST(Account, MergeAdds) {
  SampleAccount a, b;
  a.record(SetClass::full_domain, 4, 1);
  b.record(SetClass::full_domain, 4, 2);
  b.record(SetClass::general, 2, 3);
  SampleAccount m = condtest::merge_accounts(a, b);
  EXPECT_EQ(m.full_domain, 3u);
  EXPECT_EQ(m.total(), 6u);
}

TEST(Oracle, PointMassAlwaysReturnsIt) {
  SimulatedOracle o(make_pointmass(4, 0), 11);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(o.draw({0, 1}), 0);
}

TEST(Oracle, ZeroMassSetIsUniform) {
  // Mass lives on {0, 1}; conditioning on {2, 3} must be uniform.
  Distribution mu(std::vector<double>{0.5, 0.5, 0.0, 0.0});
  SimulatedOracle o(mu, 17);
  int count2 = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    int e = o.draw({2, 3});
    ASSERT_TRUE(e == 2 || e == 3);
    if (e == 2) ++count2;
  }
  double freq = static_cast<double>(count2) / trials;
  // 3 sigma of a fair coin over 10^4 draws is 0.015.
  EXPECT_NEAR(freq, 0.5, 0.015);
}

TEST(Oracle, ConditionalFrequencies) {
  SimulatedOracle o(make_uniform(10), 23);
  int count3 = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i)
    if (o.draw({3, 7}) == 3) ++count3;
  EXPECT_NEAR(static_cast<double>(count3) / trials, 0.5, 0.015);
}

TEST(Oracle, ConditionalExactnessSmallDomains) {
  // Every mu over n <= 8 here, every non-empty S: empirical conditional
  // frequencies over 10^5 draws match mu(j)/mu(S) within 4 sigma.
  RngStream mk(314159);
  for (int rep = 0; rep < 3; ++rep) {
    int n = 4 + static_cast<int>(mk.below(5));
    std::vector<double> p(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (double& v : p) {
      v = mk.uniform01();
      sum += v;
    }
    for (double& v : p) v /= sum;
    Distribution mu(p);
    std::vector<int> set;
    for (int i = 0; i < n; ++i)
      if (mk.uniform01() < 0.6) set.push_back(i);
    if (set.size() < 2) set = {0, n - 1};

    SimulatedOracle o(mu, 1000 + static_cast<std::uint64_t>(rep));
    const std::int64_t draws = 100000;
    std::map<int, std::int64_t> hist;
    for (std::int64_t i = 0; i < draws; ++i) ++hist[o.draw(set)];

    double mass = mu.mass(set);
    for (int j : set) {
      double q = mu.prob(j) / mass;
      double freq = static_cast<double>(hist[j]) / static_cast<double>(draws);
      double sigma = std::sqrt(q * (1.0 - q) / static_cast<double>(draws));
      EXPECT_NEAR(freq, q, 4.0 * sigma + 1e-6)
          << "element " << j << " in rep " << rep;
    }
  }
}

TEST(Oracle, DeterministicGivenSeedAndCalls) {
  SimulatedOracle a(make_uniform(16), 77);
  SimulatedOracle b(make_uniform(16), 77);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(a.draw({1, 3, 5, 7, 9}), b.draw({1, 3, 5, 7, 9}));
  auto ha = a.draw_histogram({0, 1, 2, 3}, 1000);
  auto hb = b.draw_histogram({0, 1, 2, 3}, 1000);
  EXPECT_EQ(ha, hb);
}

TEST(Oracle, HistogramMatchesDrawLaw) {
  // draw_histogram(S, m) must be distributed as m independent draw(S) calls.
  // Compare empirical per-element frequencies from both paths.
  Distribution mu(std::vector<double>{0.4, 0.3, 0.2, 0.1});
  std::vector<int> set = {0, 1, 2, 3};
  const std::int64_t m = 200000;

  SimulatedOracle o1(mu, 5);
  std::vector<std::int64_t> h1 = o1.draw_histogram(set, m);
  std::int64_t total = 0;
  for (std::int64_t c : h1) total += c;
  EXPECT_EQ(total, m);

  SimulatedOracle o2(mu, 6);
  std::vector<std::int64_t> h2(set.size(), 0);
  for (std::int64_t i = 0; i < m; ++i) ++h2[static_cast<std::size_t>(o2.draw(set))];

  for (std::size_t j = 0; j < set.size(); ++j) {
    double p = mu.prob(set[j]);
    double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(m));
    EXPECT_NEAR(static_cast<double>(h1[j]) / m, p, 4.0 * sigma);
    EXPECT_NEAR(static_cast<double>(h2[j]) / m, p, 4.0 * sigma);
  }
}

TEST(Oracle, HistogramZeroMassIsUniform) {
  Distribution mu(std::vector<double>{1.0, 0.0, 0.0});
  SimulatedOracle o(mu, 9);
  auto h = o.draw_histogram({1, 2}, 40000);
  EXPECT_EQ(h[0] + h[1], 40000);
  EXPECT_NEAR(static_cast<double>(h[0]) / 40000.0, 0.5, 0.012);
}

TEST(Oracle, AccountingClassifiesDraws) {
  SimulatedOracle o(make_uniform(8), 1);
  o.draw(o.full_set());
  o.draw({0, 1, 2, 3});
  o.draw_histogram({2, 5}, 10);
  const SampleAccount& acc = o.account();
  EXPECT_EQ(acc.full_domain, 1u);
  EXPECT_EQ(acc.dyadic_interval, 1u);
  EXPECT_EQ(acc.total(), 12u);
  o.account().constant_size_bound = 2;
  EXPECT_EQ(o.account().constant_size(), 10u);
}

TEST(Oracle, RejectsBadSets) {
  SimulatedOracle o(make_uniform(4), 2);
  EXPECT_THROW(o.draw({}), DomainMismatchError);
  EXPECT_THROW(o.draw({0, 0}), DomainMismatchError);
  EXPECT_THROW(o.draw({2, 1}), DomainMismatchError);
  EXPECT_THROW(o.draw({0, 4}), DomainMismatchError);
  EXPECT_THROW(o.draw_histogram({0}, -1), DomainMismatchError);
}

TEST(Oracle, QueryLogRecordsSets) {
  SimulatedOracle o(make_uniform(4), 3);
  o.enable_query_log();
  o.draw({0, 1});
  o.draw_histogram({2, 3}, 5);
  ASSERT_EQ(o.query_log().size(), 2u);
  EXPECT_EQ(o.query_log()[0], (std::vector<int>{0, 1}));
  EXPECT_EQ(o.query_log()[1], (std::vector<int>{2, 3}));
}

}  // namespace
