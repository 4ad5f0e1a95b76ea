#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "condtest/condtest.hpp"
#include "condtest/runner.hpp"

namespace {

void add_common(CLI::App* cmd, condtest::RunConfig* cfg, std::string* mode) {
  cmd->add_option("--n", cfg->n, "Domain size used when --dist is omitted");
  cmd->add_option("--epsilon", cfg->eps, "Distance parameter");
  cmd->add_option("--delta", cfg->delta, "Error probability");
  cmd->add_option("--trials", cfg->trials, "Number of independent trials");
  cmd->add_option("--seed", cfg->seed, "Master seed; trial seeds derive from it");
  cmd->add_option("--scale", cfg->scale, "Multiplier on every sample-count formula");
  cmd->add_option("--jobs", cfg->jobs, "Worker threads (output is order-independent)");
  cmd->add_option("--dist", cfg->dist_spec, "Unknown distribution spec");
  cmd->add_option("--mode", *mode, "Identity primitive: empirical or paper-faithful")
      ->check(CLI::IsMember({"empirical", "paper-faithful"}));
  cmd->add_flag("--timings", cfg->timings, "Emit wall_ms per record (non-deterministic bytes)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution testers and learners under conditional sampling"};
  app.require_subcommand(1);

  condtest::RunConfig cfg;
  std::string mode = "empirical";
  double threshold = -1.0;

  auto* uni = app.add_subcommand("test-uniformity", "Adaptive near-uniformity tester");
  auto* ident = app.add_subcommand("test-identity", "Adaptive identity tester");
  auto* uni_na =
      app.add_subcommand("test-uniformity-nonadaptive", "Non-adaptive near-uniformity tester");
  auto* ident_na = app.add_subcommand("test-identity-nonadaptive", "Non-adaptive identity tester");
  auto* learn = app.add_subcommand("learn", "Learn the unknown distribution up to relabeling");
  auto* label = app.add_subcommand("test-label-invariant",
                                   "Universal tester for label-invariant properties");
  auto* compare =
      app.add_subcommand("compare-unknown", "Test two unknowns for identity up to relabeling");
  auto* reduce = app.add_subcommand("reduce-string", "Rejection sampler over an encoded string");

  for (CLI::App* cmd : {uni, ident, uni_na, ident_na, learn, label, compare, reduce})
    add_common(cmd, &cfg, &mode);
  for (CLI::App* cmd : {uni, ident, uni_na, ident_na, learn})
    cmd->add_option("--known", cfg.known_spec,
                    "Reference distribution spec (defaults to uniform)");
  for (CLI::App* cmd : {learn, label, compare}) {
    cmd->add_option("--estimator-scale", cfg.estimator_scale,
                    "Multiplier on the per-node ratio-estimate budget");
  }
  label->add_option("--property", cfg.property, "uniformity or pow4-support");
  label->add_option("--threshold", threshold, "Tolerant acceptance threshold (default eps/2)");
  compare->add_option("--dist2", cfg.dist2_spec, "Second unknown distribution spec");
  reduce->add_option("--bits", cfg.bits, "Bit string to encode and sample from");
  reduce->add_option("--bits-file", cfg.bits_file, "File of 0/1 characters");
  reduce->add_option("--set-size", cfg.set_size, "Query-set size per trial");
  reduce->add_option("--emissions", cfg.emissions, "Samples per trial");
  reduce->add_option("--query-budget", cfg.query_budget, "Bit-probe budget per trial");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  cfg.algorithm = app.get_subcommands().front()->get_name();
  cfg.mode = mode == "paper-faithful" ? condtest::PrimitiveMode::paper_faithful
                                      : condtest::PrimitiveMode::empirical;
  if (threshold >= 0.0) cfg.threshold = threshold;

  try {
    condtest::BatchResult result = condtest::run_batch(cfg, std::cout, std::cerr);
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
