// hybrid_avoid: validate parameters, simulate, verify properties, and sample
// the flow/jump sets of the obstacle-avoidance controller.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hybrid_avoid/cli.hpp"

namespace ha = hybrid_avoid;

int main(int argc, char** argv) {
  CLI::App app{"Hybrid obstacle-avoidance controller: validation, simulation and verification"};
  app.require_subcommand(1);

  ha::cli::Options opt;
  if (const char* env = std::getenv("NAV_SEED")) {
    try {
      opt.seed = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "error: NAV_SEED must be an unsigned integer\n";
      return ha::cli::kExitUsage;
    }
  }
  std::string dims = "2..6";
  std::string sets;

  auto* validate = app.add_subcommand("validate", "check parameters and print derived quantities");
  validate->add_option("config", opt.config, "scenario JSON")->required();

  auto* simulate = app.add_subcommand("simulate", "run every initial condition in the scenario");
  simulate->add_option("config", opt.config, "scenario JSON")->required();
  simulate->add_option("--seed", opt.seed, "seed for point-cloud sampling (default $NAV_SEED or 0)");
  simulate->add_flag("--parallel", opt.parallel, "run initial conditions concurrently");
  simulate->add_flag("--unchecked", opt.unchecked, "skip parameter validation");

  auto* verify = app.add_subcommand("verify", "run sampled property checks");
  verify->add_option("config", opt.config, "scenario JSON")->required();
  verify->add_option("--suite", opt.suite, "lemmas | boundary | trajectory | all")
      ->check(CLI::IsMember({"lemmas", "boundary", "trajectory", "all"}));
  verify->add_option("--dims", dims, "dimensions for the random sweep, e.g. 2..6 or 2,3");
  verify->add_option("--seed", opt.seed, "base seed (default $NAV_SEED or 0)");
  verify->add_option("--samples", opt.samples, "samples per check");
  verify->add_option("--seeds", opt.seeds, "random configurations per dimension");
  verify->add_option("--report", opt.report_path, "JSON report path");
  verify->add_flag("--parallel", opt.parallel, "run the sweep concurrently");
  verify->add_flag("--unchecked", opt.unchecked, "skip parameter validation");

  auto* sample = app.add_subcommand("sample-sets", "rejection-sample point clouds of the named sets");
  sample->add_option("config", opt.config, "scenario JSON")->required();
  sample->add_option("--set", sets, "comma-separated: F0,J0,F1,Fm1,J1,Jm1,obstacle")->required();
  sample->add_option("--samples", opt.samples, "points per set");
  sample->add_option("--seed", opt.seed, "seed (default $NAV_SEED or 0)");
  sample->add_option("--out", opt.out_path, "CSV output path");
  sample->add_flag("--unchecked", opt.unchecked, "skip parameter validation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ha::cli::kExitUsage;
  }

  try {
    if (*validate) return ha::cli::cmd_validate(opt, std::cout, std::cerr);
    if (*simulate) return ha::cli::cmd_simulate(opt, std::cout, std::cerr);
    if (*verify) {
      opt.dims = ha::cli::parse_dims(dims);
      return ha::cli::cmd_verify(opt, std::cout, std::cerr);
    }
    if (*sample) {
      std::string item;
      for (char ch : sets + ",") {
        if (ch == ',') {
          if (!item.empty()) opt.sets.push_back(item);
          item.clear();
        } else {
          item += ch;
        }
      }
      return ha::cli::cmd_sample_sets(opt, std::cout, std::cerr);
    }
  } catch (const ha::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ha::cli::kExitUsage;
  }
  return ha::cli::kExitUsage;
}
