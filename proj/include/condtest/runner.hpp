#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "condtest/adversarial.hpp"
#include "condtest/learner.hpp"
#include "condtest/nonadaptive.hpp"
#include "condtest/oracle.hpp"

namespace condtest {

struct RunConfig {
  std::string algorithm;
  int n = 1000;
  double eps = 0.3;
  double delta = 1.0 / 3.0;
  double scale = 1.0;
  double estimator_scale = 1.0;
  std::int64_t trials = 1;
  std::uint64_t seed = 1;
  int jobs = 1;
  PrimitiveMode mode = PrimitiveMode::empirical;
  std::string dist_spec;   // unknown distribution; defaults to uniform:<n>
  std::string known_spec;  // reference distribution; defaults to uniform
  std::string dist2_spec;  // second unknown, compare-unknown only
  bool timings = false;    // emit wall_ms (breaks byte-for-byte determinism)
  std::optional<double> threshold;  // label-invariant acceptance threshold
  std::string property = "uniformity";
  // reduce-string knobs
  std::string bits;       // inline bit string (extended to a balanced one)
  std::string bits_file;  // file with 0/1 characters
  int set_size = 8;
  std::int64_t emissions = 1000;
  std::int64_t query_budget = std::numeric_limits<std::int64_t>::max();
};

struct TrialRecord {
  std::int64_t trial = 0;
  std::uint64_t seed = 0;
  std::string verdict;  // accept / reject / ok / error
  std::string error;
  std::uint64_t samples_total = 0;
  std::map<std::string, std::uint64_t> samples_by_class;
  double wall_ms = 0.0;
  nlohmann::json extra = nlohmann::json::object();
};

// 95%: z = 1.959964; 99%: z = 2.575829.
inline std::pair<double, double> wilson_interval(std::int64_t successes, std::int64_t trials,
                                                 double z) {
  if (trials <= 0) return {0.0, 1.0};
  double p = static_cast<double>(successes) / static_cast<double>(trials);
  double t = static_cast<double>(trials);
  double z2 = z * z;
  double denom = 1.0 + z2 / t;
  double center = p + z2 / (2.0 * t);
  double spread = z * std::sqrt(p * (1.0 - p) / t + z2 / (4.0 * t * t));
  return {std::max(0.0, (center - spread) / denom), std::min(1.0, (center + spread) / denom)};
}

namespace detail {

inline std::vector<std::string> split_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : spec) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

inline std::int64_t spec_int(const std::string& s, const std::string& spec) {
  try {
    std::size_t pos = 0;
    std::int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw Error("");
    return v;
  } catch (...) {
    throw Error("bad distribution spec '" + spec + "': expected integer, got '" + s + "'");
  }
}

inline double spec_real(const std::string& s, const std::string& spec) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw Error("");
    return v;
  } catch (...) {
    throw Error("bad distribution spec '" + spec + "': expected number, got '" + s + "'");
  }
}

inline std::string read_bit_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open bit file '" + path + "'");
  std::string bits, line;
  while (std::getline(in, line))
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) bits.push_back(c);
  return bits;
}

}  // namespace detail

// Distribution spec strings. n and indices inside specs are 1-based on the
// surface; internals stay 0-based.
//   uniform:<n>          halfheavy:<n>        zipf:<n>:<s>
//   pointmass:<n>:<i>    uniblock-even:<n>:<seed>   uniblock-odd:<n>:<seed>
//   string:<bitfile>     file:<path to JSON array of probabilities>
inline Distribution parse_spec(const std::string& spec) {
  std::vector<std::string> parts = detail::split_spec(spec);
  const std::string& kind = parts[0];
  auto want = [&](std::size_t n_parts) {
    if (parts.size() != n_parts)
      throw Error("bad distribution spec '" + spec + "': wrong number of fields");
  };
  if (kind == "uniform") {
    want(2);
    return make_uniform(static_cast<int>(detail::spec_int(parts[1], spec)));
  }
  if (kind == "halfheavy") {
    want(2);
    return make_halfheavy(static_cast<int>(detail::spec_int(parts[1], spec)));
  }
  if (kind == "zipf") {
    want(3);
    return make_zipf(static_cast<int>(detail::spec_int(parts[1], spec)),
                     detail::spec_real(parts[2], spec));
  }
  if (kind == "pointmass") {
    want(3);
    int n = static_cast<int>(detail::spec_int(parts[1], spec));
    std::int64_t i = detail::spec_int(parts[2], spec);
    if (i < 1 || i > n) throw Error("bad distribution spec '" + spec + "': index out of range");
    return make_pointmass(n, static_cast<int>(i - 1));
  }
  if (kind == "uniblock-even" || kind == "uniblock-odd") {
    want(3);
    int n = static_cast<int>(detail::spec_int(parts[1], spec));
    RngStream rng(static_cast<std::uint64_t>(detail::spec_int(parts[2], spec)));
    return gen_uniblock(n, kind == "uniblock-even" ? UniblockParity::even : UniblockParity::odd,
                        rng)
        .dist;
  }
  if (kind == "string") {
    want(2);
    return string_distribution(detail::read_bit_file(parts[1]));
  }
  if (kind == "file") {
    want(2);
    std::ifstream in(parts[1]);
    if (!in) throw Error("cannot open distribution file '" + parts[1] + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw Error("bad JSON in '" + parts[1] + "': " + e.what());
    }
    if (!j.is_array()) throw Error("distribution file '" + parts[1] + "' must hold a JSON array");
    std::vector<double> p;
    for (const auto& v : j) {
      if (!v.is_number()) throw Error("distribution file '" + parts[1] + "' has a non-number");
      p.push_back(v.get<double>());
    }
    return Distribution(std::move(p));
  }
  throw Error("unknown distribution spec '" + spec + "'");
}

namespace detail {

struct ParsedConfig {
  Distribution dist;
  std::optional<Distribution> known;
  std::optional<Distribution> dist2;
  std::string reduction_bits;  // balanced string for reduce-string
};

inline ParsedConfig prepare(const RunConfig& cfg) {
  ParsedConfig out;
  if (cfg.algorithm == "reduce-string") {
    std::string x = cfg.bits;
    if (!cfg.bits_file.empty()) x = read_bit_file(cfg.bits_file);
    if (x.empty()) throw Error("reduce-string needs --bits or --bits-file");
    out.reduction_bits = balanced_extend(x);
    out.dist = string_distribution(out.reduction_bits);
    return out;
  }
  std::string dist_spec = cfg.dist_spec;
  if (dist_spec.empty()) dist_spec = "uniform:" + std::to_string(cfg.n);
  out.dist = parse_spec(dist_spec);
  if (!cfg.known_spec.empty())
    out.known = parse_spec(cfg.known_spec);
  else
    out.known = make_uniform(out.dist.n());
  if (out.known->n() != out.dist.n())
    throw Error("--known and --dist disagree on the domain size");
  if (cfg.algorithm == "compare-unknown") {
    if (cfg.dist2_spec.empty()) throw Error("compare-unknown needs --dist2");
    out.dist2 = parse_spec(cfg.dist2_spec);
    if (out.dist2->n() != out.dist.n())
      throw Error("--dist2 and --dist disagree on the domain size");
  }
  return out;
}

inline std::function<double(const Distribution&)> property_by_name(const std::string& name) {
  if (name == "uniformity") return uniformity_distance;
  if (name == "pow4-support") return pow4_support_distance;
  throw Error("unknown property '" + name + "' (expected uniformity or pow4-support)");
}

}  // namespace detail

inline TrialRecord run_trial(const RunConfig& cfg, const detail::ParsedConfig& parsed,
                             std::int64_t trial) {
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
  auto t0 = std::chrono::steady_clock::now();
  SimulatedOracle o(parsed.dist, derive_seed(rec.seed, 1));
  RngStream rng(derive_seed(rec.seed, 2));
  try {
    if (cfg.algorithm == "test-uniformity" || cfg.algorithm == "test-identity") {
      TestParams params;
      params.eps = cfg.eps;
      params.delta = cfg.delta;
      params.scale = cfg.scale;
      params.mode = cfg.mode;
      Verdict v = cfg.algorithm == "test-uniformity"
                      ? test_near_uniformity(o, *parsed.known, params, rng)
                      : test_identity_adaptive(o, *parsed.known, params, rng);
      rec.verdict = v.accept ? "accept" : "reject";
    } else if (cfg.algorithm == "test-uniformity-nonadaptive") {
      NonAdaptiveParams params;
      params.eps = cfg.eps;
      params.scale = cfg.scale;
      params.mode = cfg.mode;
      Verdict v = test_near_uniformity_nonadaptive(o, *parsed.known, params, rng);
      rec.verdict = v.accept ? "accept" : "reject";
    } else if (cfg.algorithm == "test-identity-nonadaptive") {
      NonAdaptiveParams params;
      params.scale = cfg.scale;
      params.mode = cfg.mode;
      Verdict v = test_identity_nonadaptive(o, *parsed.known, cfg.eps, cfg.delta, params, rng);
      rec.verdict = v.accept ? "accept" : "reject";
    } else if (cfg.algorithm == "learn") {
      LearnScale scale{cfg.scale, cfg.estimator_scale};
      LearnResult r = learn_distribution(o, cfg.eps, cfg.delta, scale, rng);
      rec.verdict = "ok";
      rec.extra["min_perm_tv"] = min_permutation_tv(r.dist, *parsed.known);
      rec.extra["bucketization_failed"] = r.counts.failed;
      rec.extra["uniform_fallback"] = r.uniform_fallback;
    } else if (cfg.algorithm == "test-label-invariant") {
      LearnScale scale{cfg.scale, cfg.estimator_scale};
      Verdict v = test_label_invariant(o, detail::property_by_name(cfg.property), cfg.eps,
                                       cfg.delta, scale, rng, cfg.threshold);
      rec.verdict = v.accept ? "accept" : "reject";
      if (!v.trace.empty()) rec.extra["trace"] = v.trace.back();
    } else if (cfg.algorithm == "compare-unknown") {
      SimulatedOracle o2(*parsed.dist2, derive_seed(rec.seed, 3));
      LearnScale scale{cfg.scale, cfg.estimator_scale};
      Verdict v = test_identity_up_to_relabeling(o, o2, cfg.eps, cfg.delta, scale, rng);
      rec.verdict = v.accept ? "accept" : "reject";
      rec.samples_total += o2.account().total();
      for (const auto& [name, c] : o2.account().by_class()) rec.samples_by_class[name] += c;
    } else if (cfg.algorithm == "reduce-string") {
      StringReductionSampler sampler(parsed.reduction_bits, cfg.query_budget);
      int n = static_cast<int>(parsed.reduction_bits.size());
      int q_size = std::min(cfg.set_size, n);
      RngStream set_rng = rng.child(1);
      std::vector<int> q = detail::random_subset(n, std::max(1, q_size), set_rng);
      std::map<int, std::int64_t> tally;
      RngStream draw_rng = rng.child(2);
      for (std::int64_t e = 0; e < cfg.emissions; ++e) ++tally[sampler.draw(q, draw_rng)];
      double wsum = 0.0;
      for (int i : q) wsum += parsed.reduction_bits[static_cast<std::size_t>(i)] == '1' ? 3.0 : 1.0;
      double tv = 0.0;
      for (int i : q) {
        double target = (parsed.reduction_bits[static_cast<std::size_t>(i)] == '1' ? 3.0 : 1.0) / wsum;
        double got = static_cast<double>(tally[i]) / static_cast<double>(cfg.emissions);
        tv += std::abs(target - got);
      }
      rec.verdict = "ok";
      rec.extra["mean_bit_queries"] =
          static_cast<double>(sampler.queries_used()) / static_cast<double>(cfg.emissions);
      rec.extra["empirical_tv"] = tv / 2.0;
      rec.extra["set_size"] = q.size();
    } else {
      throw Error("unknown algorithm '" + cfg.algorithm + "'");
    }
  } catch (const std::exception& e) {
    rec.verdict = "error";
    rec.error = e.what();
  }
  rec.samples_total += o.account().total();
  for (const auto& [name, c] : o.account().by_class()) rec.samples_by_class[name] += c;
  auto t1 = std::chrono::steady_clock::now();
  rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return rec;
}

inline nlohmann::json record_json(const RunConfig& cfg, const TrialRecord& rec, int n) {
  nlohmann::json j;
  j["algorithm"] = cfg.algorithm;
  j["delta"] = cfg.delta;
  j["epsilon"] = cfg.eps;
  j["extra"] = rec.extra;
  j["n"] = n;
  j["samples_by_class"] = rec.samples_by_class;
  j["samples_total"] = rec.samples_total;
  j["scale"] = cfg.scale;
  j["seed"] = rec.seed;
  j["trial"] = rec.trial;
  j["verdict"] = rec.verdict;
  if (!rec.error.empty()) j["error"] = rec.error;
  if (cfg.timings) j["wall_ms"] = rec.wall_ms;
  return j;
}

struct BatchResult {
  std::vector<TrialRecord> records;
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t errored = 0;
  double accept_fraction = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 1.0;
  double mean_samples = 0.0;
  int exit_code = 0;
};

// Runs the configured trial batch. Records go to `out` as one JSON object per
// line followed by a summary object; a human-readable summary goes to `err`.
// Output bytes depend only on (config, seed): trials use counter-derived
// seeds, so --jobs cannot reorder or perturb anything.
inline BatchResult run_batch(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  detail::ParsedConfig parsed = detail::prepare(cfg);
  int n = parsed.dist.n();
  BatchResult result;
  result.records.resize(static_cast<std::size_t>(cfg.trials));

  int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    for (std::int64_t t = 0; t < cfg.trials; ++t)
      result.records[static_cast<std::size_t>(t)] = run_trial(cfg, parsed, t);
  } else {
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::int64_t t = next.fetch_add(1);
          if (t >= cfg.trials) return;
          result.records[static_cast<std::size_t>(t)] = run_trial(cfg, parsed, t);
        }
      });
    for (std::thread& w : pool) w.join();
  }

  double sample_sum = 0.0;
  for (const TrialRecord& rec : result.records) {
    out << record_json(cfg, rec, n).dump() << "\n";
    if (rec.verdict == "accept" || rec.verdict == "ok")
      ++result.accepted;
    else if (rec.verdict == "reject")
      ++result.rejected;
    else
      ++result.errored;
    sample_sum += static_cast<double>(rec.samples_total);
  }
  result.accept_fraction =
      cfg.trials > 0 ? static_cast<double>(result.accepted) / static_cast<double>(cfg.trials) : 0.0;
  auto [lo, hi] = wilson_interval(result.accepted, cfg.trials, 1.959964);
  result.wilson_lo = lo;
  result.wilson_hi = hi;
  result.mean_samples = cfg.trials > 0 ? sample_sum / static_cast<double>(cfg.trials) : 0.0;
  result.exit_code = result.errored > 0 ? 3 : 0;

  nlohmann::json summary;
  summary["type"] = "summary";
  summary["algorithm"] = cfg.algorithm;
  summary["trials"] = cfg.trials;
  summary["accepted"] = result.accepted;
  summary["rejected"] = result.rejected;
  summary["errors"] = result.errored;
  summary["accept_fraction"] = result.accept_fraction;
  summary["wilson95_lo"] = result.wilson_lo;
  summary["wilson95_hi"] = result.wilson_hi;
  summary["mean_samples"] = result.mean_samples;
  out << summary.dump() << "\n";

  err << cfg.algorithm << ": " << result.accepted << "/" << cfg.trials << " accepted ("
      << result.accept_fraction << ", 95% CI [" << result.wilson_lo << ", " << result.wilson_hi
      << "]), mean samples " << result.mean_samples << ", " << result.errored << " errors\n";
  return result;
}

}  // namespace condtest
