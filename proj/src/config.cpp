#include "qnd/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace qnd {
namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& e : v) s += (s.empty() ? "" : "; ") + e;
  return s;
}

class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void fail(const std::string& msg) { errors_.push_back(msg); }

  // Returns the sub-object, or nullptr if absent (or invalid, which is reported).
  const json* object(const json& parent, const std::string& path, const char* key) {
    if (!parent.contains(key)) return nullptr;
    const auto& v = parent.at(key);
    if (!v.is_object()) {
      fail(path + key + ": expected an object");
      return nullptr;
    }
    return &v;
  }

  void allowed(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!ok.count(it.key())) fail(path + it.key() + ": unknown key");
  }

  void number(const json& obj, const std::string& path, const char* key, double& out, bool required = false) {
    if (!obj.contains(key)) {
      if (required) fail(path + key + ": missing required key");
      return;
    }
    const auto& v = obj.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      fail(path + key + ": expected a finite number");
      return;
    }
    out = v.get<double>();
  }

  void optional_number(const json& obj, const std::string& path, const char* key, std::optional<double>& out) {
    if (!obj.contains(key) || obj.at(key).is_null()) return;
    double v = 0.0;
    number(obj, path, key, v);
    out = v;
  }

  void boolean(const json& obj, const std::string& path, const char* key, bool& out) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_boolean()) {
      fail(path + key + ": expected true or false");
      return;
    }
    out = obj.at(key).get<bool>();
  }

  void count(const json& obj, const std::string& path, const char* key, std::size_t& out, std::size_t min) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(path + key + ": expected an integer");
      return;
    }
    const auto n = v.get<long long>();
    if (n < static_cast<long long>(min)) {
      fail(path + key + ": must be >= " + std::to_string(min));
      return;
    }
    out = static_cast<std::size_t>(n);
  }

  void seed(const json& obj, const std::string& path, const char* key, std::uint64_t& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_unsigned()) {
      fail(path + key + ": expected a non-negative integer");
      return;
    }
    out = v.get<std::uint64_t>();
  }

  void grid(const json& obj, const std::string& path, const char* key, std::vector<double>& out, bool positive) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_array() || v.empty()) {
      fail(path + key + ": expected a nonempty array of numbers");
      return;
    }
    std::vector<double> g;
    for (const auto& e : v) {
      if (!e.is_number() || (positive && !(e.get<double>() > 0.0))) {
        fail(path + key + (positive ? ": entries must be positive numbers" : ": entries must be numbers"));
        return;
      }
      g.push_back(e.get<double>());
    }
    out = g;
  }

  template <class F>
  void check(F&& f, const std::string& where) {
    try {
      f();
    } catch (const std::exception& e) {
      fail(where + ": " + e.what());
    }
  }

 private:
  std::vector<std::string>& errors_;
};

void read_band(Reader& r, const json& parent, const std::string& path, const char* key, ResonatorBand& b) {
  const json* o = r.object(parent, path, key);
  if (!o) return;
  const std::string p = path + key + ".";
  r.allowed(*o, p, {"wavelength_m", "linewidth_hz", "finesse", "waist_m"});
  double kappa_hz = angular_to_hz(b.linewidth);
  r.number(*o, p, "wavelength_m", b.wavelength, true);
  r.number(*o, p, "linewidth_hz", kappa_hz, true);
  r.number(*o, p, "finesse", b.finesse, true);
  r.number(*o, p, "waist_m", b.waist, true);
  b.linewidth = hz_to_angular(kappa_hz);
}

json band_json(const ResonatorBand& b) {
  return {{"wavelength_m", b.wavelength},
          {"linewidth_hz", angular_to_hz(b.linewidth)},
          {"finesse", b.finesse},
          {"waist_m", b.waist}};
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error("invalid configuration: " + join(violations)), violations_(std::move(violations)) {}

double ContrastSpec::at(double photons) const { return c0 * std::exp(-alpha * photons - 0.5 * beta * photons * photons); }

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  std::vector<std::string> errors;
  Reader r(errors);
  RunConfig c;
  c.constants = PhysicalConstants::rb87();
  c.resonator = ResonatorParams::reference_setup();
  c.ensemble = EnsembleConfig::reference_cloud();
  if (!j.is_object()) throw ConfigError({"top level: expected a JSON object"});
  r.allowed(j, "", {"constants_file", "resonator", "ensemble", "probe", "pulse", "preparation", "contrast", "scenario",
                    "run"});

  if (j.contains("constants_file")) {
    if (!j.at("constants_file").is_string()) {
      r.fail("constants_file: expected a path string");
    } else {
      std::filesystem::path p = j.at("constants_file").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      if (!std::filesystem::exists(p)) {
        r.fail("constants_file: file not found: " + p.string());
      } else {
        c.constants_file = std::filesystem::weakly_canonical(p);
        r.check([&] { c.constants = load_constants(c.constants_file); }, "constants_file");
      }
    }
  }

  if (const json* o = r.object(j, "", "resonator")) {
    const std::string p = "resonator.";
    r.allowed(*o, p, {"mirror_separation_m", "mirror_curvature_m", "free_spectral_range_hz",
                      "transverse_mode_spacing_hz", "probe", "trap"});
    double fsr = angular_to_hz(c.resonator.free_spectral_range);
    double tms = angular_to_hz(c.resonator.transverse_mode_spacing);
    r.number(*o, p, "mirror_separation_m", c.resonator.mirror_separation, true);
    r.number(*o, p, "mirror_curvature_m", c.resonator.mirror_curvature, true);
    r.number(*o, p, "free_spectral_range_hz", fsr, true);
    r.number(*o, p, "transverse_mode_spacing_hz", tms);
    c.resonator.free_spectral_range = hz_to_angular(fsr);
    c.resonator.transverse_mode_spacing = hz_to_angular(tms);
    if (!o->contains("probe")) r.fail("resonator.probe: missing required key");
    if (!o->contains("trap")) r.fail("resonator.trap: missing required key");
    read_band(r, *o, p, "probe", c.resonator.probe);
    read_band(r, *o, p, "trap", c.resonator.trap);
  }

  if (const json* o = r.object(j, "", "ensemble")) {
    const std::string p = "ensemble.";
    r.allowed(*o, p, {"physical_atom_number", "rms_radius_m", "cloud_length_m", "effective_atom_number"});
    r.number(*o, p, "physical_atom_number", c.ensemble.physical_atom_number, true);
    r.number(*o, p, "rms_radius_m", c.ensemble.rms_radius, true);
    r.number(*o, p, "cloud_length_m", c.ensemble.cloud_length);
    r.optional_number(*o, p, "effective_atom_number", c.effective_atom_number);
    if (c.effective_atom_number && !(*c.effective_atom_number > 0.0))
      r.fail("ensemble.effective_atom_number: must be positive");
  }

  if (const json* o = r.object(j, "", "probe")) {
    const std::string p = "probe.";
    auto& pr = c.probe;
    r.allowed(*o, p, {"detuning_hz", "compensation_detuning_hz", "photons_per_measurement", "pulse_duration_s",
                      "probe_offset", "compensation_offset", "compensation", "quantum_efficiency",
                      "apd_excess_factor", "electronic_b_minus2", "technical_noise_fraction",
                      "technical_noise_correlation", "shot_noise", "electronic_noise", "technical_noise"});
    r.number(*o, p, "detuning_hz", c.probe_detuning_hz);
    r.number(*o, p, "compensation_detuning_hz", c.compensation_detuning_hz);
    r.number(*o, p, "photons_per_measurement", pr.photons_per_measurement);
    r.number(*o, p, "pulse_duration_s", pr.pulse_duration);
    r.number(*o, p, "probe_offset", pr.probe_offset);
    r.number(*o, p, "compensation_offset", pr.compensation_offset);
    r.boolean(*o, p, "compensation", pr.compensation);
    r.number(*o, p, "quantum_efficiency", pr.quantum_efficiency);
    r.number(*o, p, "apd_excess_factor", pr.apd_excess_factor);
    r.number(*o, p, "electronic_b_minus2", pr.electronic_b_minus2);
    r.number(*o, p, "technical_noise_fraction", pr.technical_noise_fraction);
    r.number(*o, p, "technical_noise_correlation", pr.technical_noise_correlation);
    r.boolean(*o, p, "shot_noise", pr.shot_noise);
    r.boolean(*o, p, "electronic_noise", pr.electronic_noise);
    r.boolean(*o, p, "technical_noise", pr.technical_noise);
  }
  c.scenario.readout_photons = c.probe.photons_per_measurement;

  if (const json* o = r.object(j, "", "pulse")) {
    r.allowed(*o, "pulse.", {"mu", "mu_lock"});
    r.number(*o, "pulse.", "mu", c.pulse.composite_pi_infidelity);
    r.number(*o, "pulse.", "mu_lock", c.mu_lock);
  }

  if (const json* o = r.object(j, "", "preparation")) {
    const std::string p = "preparation.";
    r.allowed(*o, p, {"prep_noise_factor", "impurity_fraction", "initial_contrast", "quadratic_coefficient",
                      "drift_correlation_trials"});
    r.number(*o, p, "prep_noise_factor", c.prep.prep_noise_factor);
    r.number(*o, p, "impurity_fraction", c.prep.impurity_fraction);
    r.number(*o, p, "initial_contrast", c.prep.initial_contrast);
    r.number(*o, p, "quadratic_coefficient", c.prep_quadratic);
    r.number(*o, p, "drift_correlation_trials", c.drift_correlation_trials);
  }

  if (const json* o = r.object(j, "", "contrast")) {
    r.allowed(*o, "contrast.", {"c0", "alpha", "beta"});
    r.number(*o, "contrast.", "c0", c.contrast.c0);
    r.number(*o, "contrast.", "alpha", c.contrast.alpha);
    r.number(*o, "contrast.", "beta", c.contrast.beta);
    if (!(c.contrast.c0 > 0.0 && c.contrast.c0 <= 1.0)) r.fail("contrast.c0: must lie in (0, 1]");
    if (c.contrast.alpha < 0.0 || c.contrast.beta < 0.0) r.fail("contrast.alpha, contrast.beta: must be >= 0");
  }

  if (const json* o = r.object(j, "", "scenario")) {
    const std::string p = "scenario.";
    auto& s = c.scenario;
    r.allowed(*o, p, {"photon_grid", "atom_grid", "angle_grid", "readout_photons", "ramsey_precession_phase",
                      "ramsey_phase_noise", "ramsey_precession_us", "limits_collective_cooperativity"});
    r.grid(*o, p, "photon_grid", s.photon_grid, true);
    r.grid(*o, p, "atom_grid", s.atom_grid, true);
    r.grid(*o, p, "angle_grid", s.angle_grid, false);
    r.number(*o, p, "readout_photons", s.readout_photons);
    r.number(*o, p, "ramsey_precession_phase", s.ramsey_precession_phase);
    r.number(*o, p, "ramsey_phase_noise", s.ramsey_phase_noise);
    r.number(*o, p, "ramsey_precession_us", s.ramsey_precession_us);
    r.optional_number(*o, p, "limits_collective_cooperativity", s.limits_collective_cooperativity);
    if (!(s.readout_photons > 0.0)) r.fail("scenario.readout_photons: must be positive");
    if (s.ramsey_phase_noise < 0.0) r.fail("scenario.ramsey_phase_noise: must be >= 0");
    if (s.limits_collective_cooperativity && *s.limits_collective_cooperativity < 0.0)
      r.fail("scenario.limits_collective_cooperativity: must be >= 0");
  }

  if (const json* o = r.object(j, "", "run")) {
    r.allowed(*o, "run.", {"n_trials", "master_seed", "bootstrap_errors"});
    if (o->contains("n_trials") && o->at("n_trials").is_number() && o->at("n_trials").get<double>() < 0)
      r.fail("run.n_trials: must be >= 2 (got a negative value)");
    else
      r.count(*o, "run.", "n_trials", c.n_trials, 2);
    r.seed(*o, "run.", "master_seed", c.master_seed);
    r.boolean(*o, "run.", "bootstrap_errors", c.bootstrap_errors);
  }

  r.check([&] { c.constants.validate(); }, "constants");
  r.check([&] { c.resonator.validate(c.constants); }, "resonator");
  r.check([&] { c.ensemble.validate(); }, "ensemble");
  r.check([&] { c.probe.validate(); }, "probe");
  r.check([&] { c.pulse.validate(); }, "pulse");
  r.check([&] { c.prep.validate(); }, "preparation");
  if (!(c.mu_lock >= 0.0 && c.mu_lock <= 0.1)) r.fail("pulse.mu_lock: must lie in [0, 0.1]");
  if (c.prep_quadratic < 0.0) r.fail("preparation.quadratic_coefficient: must be >= 0");
  if (c.drift_correlation_trials < 0.0) r.fail("preparation.drift_correlation_trials: must be >= 0");
  if (c.contrast.c0 > c.prep.initial_contrast)
    r.fail("contrast.c0: must not exceed preparation.initial_contrast");

  if (!errors.empty()) throw ConfigError(errors);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read configuration file " + path.string()});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON: ") + e.what()});
  }
  return parse_config(j, path.parent_path());
}

json resolved_config(const RunConfig& c) {
  const auto& pr = c.probe;
  const auto& s = c.scenario;
  json j = {
      {"constants_file", c.constants_file.empty() ? json(nullptr) : json(c.constants_file.string())},
      {"resonator",
       {{"mirror_separation_m", c.resonator.mirror_separation},
        {"mirror_curvature_m", c.resonator.mirror_curvature},
        {"free_spectral_range_hz", angular_to_hz(c.resonator.free_spectral_range)},
        {"transverse_mode_spacing_hz", angular_to_hz(c.resonator.transverse_mode_spacing)},
        {"probe", band_json(c.resonator.probe)},
        {"trap", band_json(c.resonator.trap)}}},
      {"ensemble",
       {{"physical_atom_number", c.ensemble.physical_atom_number},
        {"rms_radius_m", c.ensemble.rms_radius},
        {"cloud_length_m", c.ensemble.cloud_length},
        {"effective_atom_number", c.effective_atom_number ? json(*c.effective_atom_number) : json(nullptr)}}},
      {"probe",
       {{"detuning_hz", c.probe_detuning_hz},
        {"compensation_detuning_hz", c.compensation_detuning_hz},
        {"photons_per_measurement", pr.photons_per_measurement},
        {"pulse_duration_s", pr.pulse_duration},
        {"probe_offset", pr.probe_offset},
        {"compensation_offset", pr.compensation_offset},
        {"compensation", pr.compensation},
        {"quantum_efficiency", pr.quantum_efficiency},
        {"apd_excess_factor", pr.apd_excess_factor},
        {"electronic_b_minus2", pr.electronic_b_minus2},
        {"technical_noise_fraction", pr.technical_noise_fraction},
        {"technical_noise_correlation", pr.technical_noise_correlation},
        {"shot_noise", pr.shot_noise},
        {"electronic_noise", pr.electronic_noise},
        {"technical_noise", pr.technical_noise}}},
      {"pulse", {{"mu", c.pulse.composite_pi_infidelity}, {"mu_lock", c.mu_lock}}},
      {"preparation",
       {{"prep_noise_factor", c.prep.prep_noise_factor},
        {"impurity_fraction", c.prep.impurity_fraction},
        {"initial_contrast", c.prep.initial_contrast},
        {"quadratic_coefficient", c.prep_quadratic},
        {"drift_correlation_trials", c.drift_correlation_trials}}},
      {"contrast", {{"c0", c.contrast.c0}, {"alpha", c.contrast.alpha}, {"beta", c.contrast.beta}}},
      {"scenario",
       {{"photon_grid", s.photon_grid},
        {"atom_grid", s.atom_grid},
        {"angle_grid", s.angle_grid},
        {"readout_photons", s.readout_photons},
        {"ramsey_precession_phase", s.ramsey_precession_phase},
        {"ramsey_phase_noise", s.ramsey_phase_noise},
        {"ramsey_precession_us", s.ramsey_precession_us},
        {"limits_collective_cooperativity",
         s.limits_collective_cooperativity ? json(*s.limits_collective_cooperativity) : json(nullptr)}}},
      {"run", {{"n_trials", c.n_trials}, {"master_seed", c.master_seed}, {"bootstrap_errors", c.bootstrap_errors}}},
  };
  return j;
}

Model build_model(const RunConfig& c) {
  Model m;
  const double probe = hz_to_angular(c.probe_detuning_hz);
  std::optional<double> comp;
  if (c.probe.compensation) comp = hz_to_angular(c.compensation_detuning_hz);
  m.coupling = compute_coupling(c.constants, c.resonator, c.ensemble, probe, comp);
  m.rates = raman_rates(probe, m.coupling.effective_cooperativity, c.constants);
  m.n0 = c.effective_atom_number.value_or(m.coupling.effective_atom_number);

  EngineParams& e = m.engine;
  e.n0 = m.n0;
  e.domega_dn = m.coupling.domega_dn;
  e.phi_eff = m.coupling.phase_per_photon_effective;
  e.rates = FlipRates::from(m.rates);
  e.probe = c.probe;
  e.probe.photons_per_measurement = c.scenario.readout_photons;
  e.prep = c.prep;
  e.prep_quadratic = c.prep_quadratic;
  e.drift_correlation_trials = c.drift_correlation_trials;
  e.pulse = c.pulse;
  e.mu_lock = c.mu_lock;
  e.contrast = {c.contrast.alpha, c.contrast.beta};
  e.validate();
  return m;
}

EngineParams engine_at(const Model& m, double photons, double n0) {
  EngineParams e = m.engine;
  e.probe.photons_per_measurement = photons;
  e.n0 = n0;
  e.validate();
  return e;
}

}  // namespace qnd
