// qndsim: run a named scenario and write its artifacts.
//
//   qndsim run --config PATH --scenario NAME --trials N --seed S --out DIR [--verify MANIFEST] [--threads K]
//
// Exit codes: 0 success, 2 validation error, 3 runtime or fit error, 4 manifest mismatch on --verify.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "qnd/analysis.hpp"
#include "qnd/config.hpp"
#include "qnd/scenarios.hpp"

namespace {

enum Exit { ok = 0, validation = 2, runtime = 3, mismatch = 4 };

struct Options {
  std::string config;
  std::string scenario;
  std::optional<long long> trials;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string verify;
  unsigned threads = 1;
};

int run(const Options& o) {
  nlohmann::json expected;
  if (!o.verify.empty()) {
    std::ifstream in(o.verify);
    if (!in) throw qnd::ConfigError({"cannot read manifest " + o.verify});
    try {
      expected = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw qnd::ConfigError({std::string("malformed manifest: ") + e.what()});
    }
  }

  auto config = qnd::load_config(o.config);
  std::string scenario = o.scenario;
  if (scenario.empty() && expected.contains("scenario")) scenario = expected["scenario"].get<std::string>();
  if (scenario.empty()) throw qnd::ConfigError({"--scenario is required"});
  if (o.trials) {
    if (*o.trials < 2) throw qnd::ConfigError({"--trials must be >= 2"});
    config.n_trials = static_cast<std::size_t>(*o.trials);
  } else if (expected.contains("trials")) {
    config.n_trials = expected["trials"].get<std::size_t>();
  }
  if (o.seed)
    config.master_seed = *o.seed;
  else if (expected.contains("seed"))
    config.master_seed = expected["seed"].get<std::uint64_t>();

  const auto result = qnd::run_scenario(scenario, config, o.threads);
  const auto manifest = qnd::write_outputs(o.out, result, config);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote " << result.files.size() + 2 << " files to " << o.out << " (config " << manifest["config_hash"].get<std::string>()
            << ")\n";

  if (!o.verify.empty()) {
    const auto diff = qnd::compare_manifests(expected, manifest);
    if (!diff.empty()) {
      std::cerr << "manifest mismatch:\n";
      for (const auto& d : diff) std::cerr << "  " << d << "\n";
      return mismatch;
    }
    std::cout << "verified against " << o.verify << "\n";
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cavity-measurement spin squeezing simulator"};
  app.require_subcommand(1);
  Options o;
  auto* cmd = app.add_subcommand("run", "run one scenario");
  cmd->add_option("--config", o.config, "JSON configuration")->required()->check(CLI::ExistingFile);
  std::string names;
  for (const auto& n : qnd::scenario_names()) names += (names.empty() ? "" : ", ") + n;
  cmd->add_option("--scenario", o.scenario, "one of: " + names);
  cmd->add_option("--trials", o.trials, "trials per grid point (overrides run.n_trials)");
  cmd->add_option("--seed", o.seed, "master seed (overrides run.master_seed)");
  cmd->add_option("--out", o.out, "output directory")->required();
  cmd->add_option("--verify", o.verify, "manifest to reproduce byte for byte")->check(CLI::ExistingFile);
  cmd->add_option("--threads", o.threads, "worker threads (wall time only)")->check(CLI::Range(1u, 256u));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : validation;
  }

  try {
    return run(o);
  } catch (const qnd::ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << "\n";
    return validation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return validation;
  } catch (const qnd::FitError& e) {
    std::cerr << "fit failed: " << e.what() << "\n";
    return runtime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return runtime;
  }
}
