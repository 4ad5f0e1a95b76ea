#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "condtest/runner.hpp"

namespace {

using condtest::BatchResult;
using condtest::derive_seed;
using condtest::Distribution;
using condtest::Error;
using condtest::make_uniform;
using condtest::parse_spec;
using condtest::RunConfig;
using condtest::run_batch;
using condtest::tv_distance;
using condtest::wilson_interval;

int support_size(const Distribution& d) {
  int c = 0;
  for (int i = 0; i < d.n(); ++i) c += d.prob(i) > 0.0;
  return c;
}

BatchResult run_quiet(const RunConfig& cfg, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  BatchResult r = run_batch(cfg, out, err);
  if (out_text) *out_text = out.str();
  return r;
}

TEST(WilsonInterval, BoundsAndKnownValue) {
  auto [lo0, hi0] = wilson_interval(0, 0, 1.959964);
  EXPECT_EQ(lo0, 0.0);
  EXPECT_EQ(hi0, 1.0);
  auto [lo, hi] = wilson_interval(10, 10, 1.959964);
  EXPECT_NEAR(lo, 0.7225, 1e-3);
  EXPECT_DOUBLE_EQ(hi, 1.0);
  auto [lo5, hi5] = wilson_interval(5, 10, 1.959964);
  EXPECT_LT(lo5, 0.5);
  EXPECT_GT(hi5, 0.5);
  EXPECT_GT(lo5, 0.0);
  EXPECT_LT(hi5, 1.0);
}

TEST(ParseSpec, CoreForms) {
  Distribution u = parse_spec("uniform:8");
  EXPECT_EQ(u.n(), 8);
  EXPECT_DOUBLE_EQ(u.prob(3), 1.0 / 8);

  EXPECT_EQ(parse_spec("halfheavy:8").n(), 8);

  Distribution z = parse_spec("zipf:4:1.0");
  EXPECT_EQ(z.n(), 4);
  EXPECT_GT(z.prob(0), z.prob(3));

  // Point-mass indices are 1-based on the command line.
  Distribution p = parse_spec("pointmass:8:1");
  EXPECT_DOUBLE_EQ(p.prob(0), 1.0);
  Distribution p3 = parse_spec("pointmass:8:3");
  EXPECT_DOUBLE_EQ(p3.prob(2), 1.0);
  EXPECT_DOUBLE_EQ(parse_spec("pointmass:8:8").prob(7), 1.0);
}

TEST(ParseSpec, GeneratedAndFileForms) {
  Distribution e = parse_spec("uniblock-even:65536:7");
  EXPECT_EQ(e.n(), 65536);
  int se = support_size(e);
  EXPECT_TRUE(se == 16 || se == 64 || se == 256 || se == 1024 || se == 4096) << se;
  EXPECT_GE(tv_distance(e, make_uniform(65536)), 0.5);
  // Seeded: the same spec parses to the same distribution.
  EXPECT_DOUBLE_EQ(tv_distance(e, parse_spec("uniblock-even:65536:7")), 0.0);

  Distribution o = parse_spec("uniblock-odd:65536:7");
  int so = support_size(o);
  EXPECT_TRUE(so == 32 || so == 128 || so == 512 || so == 2048 || so == 8192) << so;

  std::string bit_path = testing::TempDir() + "condtest_bits.txt";
  {
    std::ofstream f(bit_path);
    f << "00\n1 1\n";
  }
  Distribution s = parse_spec("string:" + bit_path);
  EXPECT_EQ(s.n(), 4);
  EXPECT_DOUBLE_EQ(s.prob(0), 1.0 / 8);
  EXPECT_DOUBLE_EQ(s.prob(2), 3.0 / 8);

  std::string json_path = testing::TempDir() + "condtest_dist.json";
  {
    std::ofstream f(json_path);
    f << "[0.25, 0.75]";
  }
  Distribution d = parse_spec("file:" + json_path);
  EXPECT_EQ(d.n(), 2);
  EXPECT_DOUBLE_EQ(d.prob(1), 0.75);
}

TEST(ParseSpec, Errors) {
  EXPECT_THROW(parse_spec("bogus:4"), Error);
  EXPECT_THROW(parse_spec("uniform"), Error);
  EXPECT_THROW(parse_spec("uniform:x"), Error);
  EXPECT_THROW(parse_spec("zipf:4"), Error);
  EXPECT_THROW(parse_spec("pointmass:8:0"), Error);
  EXPECT_THROW(parse_spec("pointmass:8:9"), Error);
  EXPECT_THROW(parse_spec("file:/nonexistent/path.json"), Error);
  EXPECT_THROW(parse_spec("string:/nonexistent/path.txt"), Error);
}

TEST(RunBatch, ByteDeterministicAcrossJobsAndRuns) {
  RunConfig cfg;
  cfg.algorithm = "test-uniformity";
  cfg.dist_spec = "halfheavy:64";
  cfg.eps = 0.3;
  cfg.scale = 1e-6;
  cfg.trials = 6;
  cfg.seed = 123;

  std::string first, again, parallel;
  cfg.jobs = 1;
  run_quiet(cfg, &first);
  run_quiet(cfg, &again);
  cfg.jobs = 4;
  run_quiet(cfg, &parallel);

  EXPECT_EQ(first, again);
  EXPECT_EQ(first, parallel);
  EXPECT_EQ(first.find("wall_ms"), std::string::npos);
}

TEST(RunBatch, RecordShapeAndSeeds) {
  RunConfig cfg;
  cfg.algorithm = "test-uniformity";
  cfg.dist_spec = "uniform:64";
  cfg.scale = 1e-6;
  cfg.trials = 2;
  cfg.seed = 42;

  std::string text;
  BatchResult r = run_quiet(cfg, &text);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0].seed, derive_seed(42, 0));
  EXPECT_EQ(r.records[1].seed, derive_seed(42, 1));
  EXPECT_EQ(r.exit_code, 0);

  std::istringstream lines(text);
  std::string line;
  ASSERT_TRUE(std::getline(lines, line));
  nlohmann::json j = nlohmann::json::parse(line);
  for (const char* key : {"algorithm", "delta", "epsilon", "extra", "n", "samples_by_class",
                          "samples_total", "scale", "seed", "trial", "verdict"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_FALSE(j.contains("wall_ms"));
  EXPECT_FALSE(j.contains("error"));
  EXPECT_EQ(j["n"], 64);
  EXPECT_EQ(j["trial"], 0);

  std::getline(lines, line);
  ASSERT_TRUE(std::getline(lines, line));
  nlohmann::json summary = nlohmann::json::parse(line);
  EXPECT_EQ(summary["type"], "summary");
  EXPECT_EQ(summary["accepted"].get<int>() + summary["rejected"].get<int>() +
                summary["errors"].get<int>(),
            2);
  EXPECT_FALSE(std::getline(lines, line));

  cfg.timings = true;
  run_quiet(cfg, &text);
  EXPECT_NE(text.find("wall_ms"), std::string::npos);
}

TEST(RunBatch, ErrorTrialsExitThree) {
  RunConfig cfg;
  cfg.algorithm = "bogus-algorithm";
  cfg.trials = 2;
  std::string text;
  BatchResult r = run_quiet(cfg, &text);
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(r.errored, 2);
  EXPECT_NE(text.find("unknown algorithm"), std::string::npos);
}

TEST(RunBatch, ConfigValidation) {
  RunConfig bad_known;
  bad_known.algorithm = "test-uniformity";
  bad_known.dist_spec = "uniform:4";
  bad_known.known_spec = "uniform:8";
  EXPECT_THROW(run_quiet(bad_known), Error);

  RunConfig no_dist2;
  no_dist2.algorithm = "compare-unknown";
  no_dist2.dist_spec = "uniform:4";
  EXPECT_THROW(run_quiet(no_dist2), Error);

  RunConfig bad_dist2;
  bad_dist2.algorithm = "compare-unknown";
  bad_dist2.dist_spec = "uniform:4";
  bad_dist2.dist2_spec = "uniform:8";
  EXPECT_THROW(run_quiet(bad_dist2), Error);

  RunConfig no_bits;
  no_bits.algorithm = "reduce-string";
  EXPECT_THROW(run_quiet(no_bits), Error);
}

TEST(RunBatch, AdaptiveUsesFewerSamplesThanNonAdaptive) {
  RunConfig cfg;
  cfg.dist_spec = "uniform:64";
  cfg.eps = 0.5;
  cfg.trials = 2;
  cfg.seed = 7;

  cfg.algorithm = "test-uniformity";
  BatchResult adaptive = run_quiet(cfg);
  cfg.algorithm = "test-uniformity-nonadaptive";
  BatchResult nonadaptive = run_quiet(cfg);

  EXPECT_EQ(adaptive.errored, 0);
  EXPECT_EQ(nonadaptive.errored, 0);
  EXPECT_GT(nonadaptive.mean_samples, adaptive.mean_samples);
}

TEST(RunBatch, IdentityAcceptsMatchingPointMass) {
  RunConfig cfg;
  cfg.algorithm = "test-identity";
  cfg.dist_spec = "pointmass:64:1";
  cfg.known_spec = "pointmass:64:1";
  cfg.trials = 2;
  cfg.seed = 5;
  BatchResult r = run_quiet(cfg);
  EXPECT_EQ(r.accepted, 2);
  EXPECT_EQ(r.exit_code, 0);
}

TEST(RunBatch, LearnEmitsRecoveryFields) {
  RunConfig cfg;
  cfg.algorithm = "learn";
  cfg.dist_spec = "uniform:8";
  cfg.eps = 0.5;
  cfg.scale = 5e-3;
  cfg.estimator_scale = 5e-7;
  cfg.trials = 1;
  cfg.seed = 42;
  BatchResult r = run_quiet(cfg);
  ASSERT_EQ(r.records.size(), 1u);
  const condtest::TrialRecord& rec = r.records[0];
  EXPECT_EQ(rec.verdict, "ok");
  ASSERT_TRUE(rec.extra.contains("min_perm_tv"));
  ASSERT_TRUE(rec.extra.contains("bucketization_failed"));
  ASSERT_TRUE(rec.extra.contains("uniform_fallback"));
  EXPECT_LE(rec.extra["min_perm_tv"].get<double>(), 0.25);
}

TEST(RunBatch, LabelInvariantThresholdOverride) {
  RunConfig cfg;
  cfg.algorithm = "test-label-invariant";
  cfg.dist_spec = "pointmass:16:2";
  cfg.property = "uniformity";
  cfg.eps = 0.5;
  cfg.scale = 2.5e-4;
  cfg.estimator_scale = 2e-9;
  cfg.threshold = 1.0;  // every distribution is within 1, so this must accept
  cfg.trials = 1;
  cfg.seed = 3;
  BatchResult r = run_quiet(cfg);
  EXPECT_EQ(r.accepted, 1);

  cfg.property = "no-such-property";
  BatchResult bad = run_quiet(cfg);
  EXPECT_EQ(bad.exit_code, 3);
}

TEST(RunBatch, CompareUnknownCountsBothOracles) {
  RunConfig cfg;
  cfg.algorithm = "compare-unknown";
  cfg.dist_spec = "uniform:16";
  cfg.dist2_spec = "uniform:16";
  cfg.eps = 0.5;
  cfg.scale = 1e-5;
  cfg.estimator_scale = 2e-10;
  cfg.trials = 1;
  cfg.seed = 8;
  BatchResult r = run_quiet(cfg);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].verdict, "accept");
  EXPECT_GT(r.records[0].samples_total, 0u);
  EXPECT_FALSE(r.records[0].samples_by_class.empty());
}

TEST(RunBatch, ReduceStringEmitsLawDiagnostics) {
  RunConfig cfg;
  cfg.algorithm = "reduce-string";
  cfg.bits = "0101";
  cfg.set_size = 4;
  cfg.emissions = 2000;
  cfg.trials = 1;
  cfg.seed = 11;
  BatchResult r = run_quiet(cfg);
  ASSERT_EQ(r.records.size(), 1u);
  const condtest::TrialRecord& rec = r.records[0];
  EXPECT_EQ(rec.verdict, "ok");
  // The reduction answers bit probes only; no conditional-sample oracle runs.
  EXPECT_EQ(rec.samples_total, 0u);
  double mean_queries = rec.extra["mean_bit_queries"].get<double>();
  EXPECT_GE(mean_queries, 1.0);
  EXPECT_LE(mean_queries, 3.3);
  EXPECT_LE(rec.extra["empirical_tv"].get<double>(), 0.1);
  EXPECT_EQ(rec.extra["set_size"].get<int>(), 4);
}

}  // namespace
