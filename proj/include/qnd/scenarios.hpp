#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnd/analysis.hpp"
#include "qnd/config.hpp"
#include "qnd/limits.hpp"

namespace qnd {

struct OutputFile {
  std::string name;
  std::string content;
};

struct ScenarioResult {
  std::string scenario;
  std::vector<OutputFile> files;
  std::vector<std::string> warnings;
  nlohmann::json summary;  // headline numbers, also copied into the manifest
};

const std::vector<std::string>& scenario_names();

/// Runs one named scenario; --threads only changes wall time.
ScenarioResult run_scenario(const std::string& name, const RunConfig& config, unsigned threads = 1);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Hash of the resolved configuration with file paths replaced by their contents.
std::string config_hash(const RunConfig& config);

/// Fixed-precision number formatting shared by every artifact (%.10g, "nan" for NaN).
std::string format_number(double v);

/// Manifest for a finished run: seed, config hash, version, scenario, trials and per-file hashes.
nlohmann::json run_manifest(const ScenarioResult& result, const RunConfig& config);

/// Writes the scenario files, resolved_config.json and manifest.json into `dir`; returns the manifest.
nlohmann::json write_outputs(const std::filesystem::path& dir, const ScenarioResult& result, const RunConfig& config);

/// Empty when the two manifests describe byte-identical outputs; otherwise one line per difference.
std::vector<std::string> compare_manifests(const nlohmann::json& expected, const nlohmann::json& actual);

// Building blocks shared with the acceptance checks and the Python module.

/// Squeezing numbers of one readout run at photon number p, using the configured contrast model.
struct ReadoutPoint {
  double photons = 0.0;
  VarianceReport variances;
  SqueezingReport squeezing;
  double sigma2_se = 0.0;  // first-order propagation of the var_meas and var_prep errors
  double model_var_meas = 0.0;
  double model_var_prep = 0.0;
  SqueezingReport model;
};

ReadoutPoint readout_point(const Model& model, const RunConfig& config, double photons, std::uint64_t seed,
                           unsigned threads = 1);

/// Model var_prep (spin units): flip-decorrelated projection noise plus preparation drift.
double model_prep_variance(const EngineParams& params);

LimitInputs limit_inputs(const Model& model, const RunConfig& config);

/// Independent per-point seed derived from the master seed.
std::uint64_t point_seed(std::uint64_t master_seed, std::uint64_t index);

}  // namespace qnd
