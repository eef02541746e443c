#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "qnd/cavity.hpp"
#include "qnd/spin.hpp"

namespace qnd {

/// Probe light and detection chain for one measurement (two pulses).
struct ProbeConfig {
  double photons_per_measurement = 6.4e5;  // p, transmitted probe-sideband photons; p/2 per pulse
  double pulse_duration = 50e-6;           // s, metadata
  double probe_offset = 0.5;               // kappa units, probe sideband vs empty-cavity mode
  double compensation_offset = -0.5;       // kappa units
  bool compensation = true;
  double quantum_efficiency = 0.43;
  double apd_excess_factor = 1.9;
  double electronic_b_minus2 = 6e13;       // atom^2 photon^2
  double technical_noise_fraction = 0.04;  // b0_tech / N_0
  double technical_noise_correlation = 0.0;
  bool shot_noise = true;
  bool electronic_noise = true;
  bool technical_noise = true;

  void validate() const;
  [[nodiscard]] SlopeBranch branch() const { return probe_offset >= 0.0 ? SlopeBranch::upper : SlopeBranch::lower; }
};

/// Per-effective-atom free-space Raman probabilities per transmitted photon.
struct FlipRates {
  double delta_f = 0.0;
  double delta_mf = 0.0;
  double delta_f_delta_mf = 0.0;
  [[nodiscard]] double total() const { return delta_f + delta_mf + delta_f_delta_mf; }
  static FlipRates from(const ScatteringRates& r) { return {r.p_delta_f, r.p_delta_mf, r.p_delta_f_delta_mf}; }
};

/// Everything a trial needs besides the plan and its random stream.
struct EngineParams {
  double n0 = 3.3e4;
  double domega_dn = 4.5e-5;  // kappa per unit of N = N_2 - N_1
  double phi_eff = 1.8e-4;    // rad per transmitted photon
  FlipRates rates;
  ProbeConfig probe;
  PreparationModel prep;
  double prep_quadratic = 0.0;            // a_2: extra 4 Var(S_z) = a_2 N_0^2 from slow drift
  double drift_correlation_trials = 500.0;
  PulseModel pulse;
  double mu_lock = 0.005;
  ContrastModel contrast;
  bool record_flip_events = false;

  void validate() const;
  [[nodiscard]] double total_mu() const { return pulse.composite_pi_infidelity + mu_lock; }
  /// dN / d(2 omega / kappa).
  [[nodiscard]] double k_factor() const { return 1.0 / (2.0 * domega_dn); }
};

enum class Slot { m1m, m1p, m2p, m2m, mt1m, mt1p, mt2m, mt2p };
inline constexpr std::size_t kSlotCount = 8;

enum class StepKind { prepare, pulse, composite_pi, rotate, ramsey, record_szf };

struct SequenceStep {
  StepKind kind = StepKind::prepare;
  Slot slot = Slot::m1m;  // pulse only
  double angle = 0.0;     // rotate: alpha; ramsey: mean precession phase
  double phase_noise = 0.0;
};

struct SequencePlan {
  std::string name;
  std::vector<SequenceStep> steps;
  // Documentation only; no motional dynamics are simulated.
  double pulse_separation_us = 280.0;
  double measurement_separation_us = 330.0;

  /// Every measurement's two pulses bracket exactly one composite pi, and pulses precede any use.
  void validate() const;
  [[nodiscard]] bool has_slot(Slot s) const;

  static SequencePlan squeeze_readout();
  /// squeeze_readout followed by two fresh CSS preparations, each read out once.
  static SequencePlan double_prep();
  static SequencePlan rotate_alpha(double alpha);
  static SequencePlan ramsey_clock(double precession_phase, double phase_noise);
};

struct FlipEvent {
  Slot slot = Slot::m1m;
  double time = 0.0;  // fraction of the pulse
  int kind = 0;       // 0: Delta F, 1: Delta m_F, 2: both
  int e = 0;          // measurement-frame sign of the atom before the event
};

struct TrialRecord {
  std::uint64_t trial_id = 0;
  std::array<double, kSlotCount> pulses{};  // indexed by Slot
  double m1 = 0.0, m2 = 0.0;
  double mt1 = std::numeric_limits<double>::quiet_NaN();
  double mt2 = std::numeric_limits<double>::quiet_NaN();
  double true_sz0 = 0.0;
  double true_szf = 0.0;
  long flips_df = 0, flips_dmf = 0, flips_both = 0, flips_mu = 0;
  bool saturated = false;
  std::vector<FlipEvent> flip_events;  // only with EngineParams::record_flip_events

  [[nodiscard]] double pulse(Slot s) const { return pulses[static_cast<std::size_t>(s)]; }
};

struct TrialSet {
  std::vector<TrialRecord> records;
  std::uint64_t master_seed = 0;
  std::string scenario;
  nlohmann::json parameters;
  std::size_t saturated_trials = 0;
  bool saturation_warning = false;  // more than 1% of trials saturated
};

/// Piecewise-constant cavity shift over one pulse; breakpoints are fractions in [0, 1].
struct ShiftTrajectory {
  std::vector<double> breakpoints{0.0, 1.0};
  std::vector<double> omega{0.0};  // kappa units, one per segment
  [[nodiscard]] double mean_transmission(double probe_offset) const;
  [[nodiscard]] double mean_shift() const;
};

struct PulseReading {
  double omega = 0.0;  // inferred shift, kappa units
  double transmission = 0.0;
  double counts = 0.0;
  bool saturated = false;
};

/// One probe pulse with `photons` transmitted probe-sideband photons at the operating point.
/// Counts are Gaussian with variance f_APD * mean (shot) plus `electronic_variance`.
PulseReading simulate_probe_pulse(const ShiftTrajectory& trajectory, double photons, const ProbeConfig& probe,
                                  double electronic_variance, std::mt19937_64& rng);

/// Electronic count variance reproducing b_-2 for the given K = dN/d(2 omega/kappa).
double electronic_count_variance(const ProbeConfig& probe, double k_factor);

TrialRecord simulate_trial(const EngineParams& params, const SequencePlan& plan, std::mt19937_64& rng,
                           double drift_offset = 0.0);

/// Slow preparation drift offsets (spin units), one per trial, generated serially from the master seed.
std::vector<double> preparation_drift(const EngineParams& params, std::size_t n_trials, std::uint64_t master_seed);

TrialSet run_trials(const EngineParams& params, const SequencePlan& plan, std::size_t n_trials,
                    std::uint64_t master_seed, unsigned threads = 1);

struct SpinFlipCovariance {
  Eigen::Matrix4d mean_flip_probability;  // r-bar, order (1-, 1+, 2+, 2-)
  Eigen::Matrix4d covariance;             // spin units, (N_0/4)(1 - 2 r-bar)
  double var_meas_term = 0.0;             // 4 Var(S_z)_meas flip contribution, atom units
  double var_m1_term = 0.0;               // 4 Var(M_1) for a CSS, atom units
};

/// First-order spin-flip covariance of the four pulse measurements for a CSS.
SpinFlipCovariance spinflip_covariance_analytic(double p_df, double p_dmf, double p_dfdmf, double mu, double photons,
                                                double n0);

/// Upper bound on normalized variance from coherent pulse errors: dphi^2 C_SE^2 N_0.
double coherent_error_bound(double dphi_max, double contrast_spin_echo, double n0);

nlohmann::json engine_params_to_json(const EngineParams& p);
std::string slot_name(Slot s);

}  // namespace qnd
