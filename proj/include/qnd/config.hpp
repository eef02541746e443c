#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnd/cavity.hpp"
#include "qnd/constants.hpp"
#include "qnd/engine.hpp"

namespace qnd {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

struct ContrastSpec {
  double c0 = 0.69;
  double alpha = 7e-7;   // per photon
  double beta = 9e-13;   // per photon^2
  [[nodiscard]] double at(double photons) const;
};

struct ScenarioKnobs {
  std::vector<double> photon_grid{1e5, 2e5, 3e5, 4.5e5, 6.4e5, 9e5};
  std::vector<double> atom_grid{5e3, 1e4, 1.6e4, 2.2e4, 3.3e4, 4.4e4};  // N_0
  std::vector<double> angle_grid{0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.2, 1.5707963267948966};  // rad
  double readout_photons = 6.4e5;
  double ramsey_precession_phase = 0.0;  // rad
  double ramsey_phase_noise = 0.0;       // rad rms
  double ramsey_precession_us = 70.0;    // metadata
  std::optional<double> limits_collective_cooperativity;  // default N_0 eta_eff from the cavity model
};

struct RunConfig {
  std::filesystem::path constants_file;
  PhysicalConstants constants;
  ResonatorParams resonator;
  EnsembleConfig ensemble;
  std::optional<double> effective_atom_number;  // overrides N_0 from the ensemble model
  double probe_detuning_hz = 3.57e9;
  double compensation_detuning_hz = -24.59e9;
  ProbeConfig probe;
  PulseModel pulse;
  double mu_lock = 0.005;
  PreparationModel prep;
  double prep_quadratic = 0.0;
  double drift_correlation_trials = 500.0;
  ContrastSpec contrast;
  ScenarioKnobs scenario;
  std::size_t n_trials = 10000;
  std::uint64_t master_seed = 1;
  bool bootstrap_errors = false;
};

/// Parses and validates; every violation is collected before throwing ConfigError.
/// Relative file paths resolve against base_dir.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration (defaults filled), suitable for re-loading.
nlohmann::json resolved_config(const RunConfig& c);

/// Physics derived from a configuration: coupling chain, scattering and engine parameters.
struct Model {
  CouplingSummary coupling;
  ScatteringRates rates;
  double n0 = 0.0;
  EngineParams engine;  // at the configured readout photon number and N_0
};

Model build_model(const RunConfig& c);

/// Engine parameters for another photon number or atom number (coupling per atom unchanged).
EngineParams engine_at(const Model& m, double photons, double n0);

}  // namespace qnd
