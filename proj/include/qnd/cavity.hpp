#pragma once

#include <optional>
#include <string>

#include "qnd/constants.hpp"

namespace qnd {

/// Optical properties of the resonator at one wavelength.
struct ResonatorBand {
  double wavelength = 0.0;  // m
  double linewidth = 0.0;   // kappa, rad/s (FWHM)
  double finesse = 0.0;
  double waist = 0.0;       // mode waist at the atoms, m
};

/// Near-confocal Fabry-Perot resonator.
///
/// The transverse mode spacing is carried as measured data only.
struct ResonatorParams {
  double mirror_separation = 0.0;        // m
  double mirror_curvature = 0.0;         // m
  double free_spectral_range = 0.0;      // rad/s
  double transverse_mode_spacing = 0.0;  // rad/s, metadata
  ResonatorBand probe;                   // 780 nm
  ResonatorBand trap;                    // 851 nm

  /// Checks positivity and |F - pi c/(L kappa)|/F < 1e-2 for both bands.
  void validate(const PhysicalConstants& constants) const;

  static ResonatorParams reference_setup();
};

enum class AxialDistribution { uniform_standing_wave };

struct EnsembleConfig {
  double physical_atom_number = 0.0;  // N_a
  double rms_radius = 0.0;            // sigma_r, per transverse axis, m
  AxialDistribution axial = AxialDistribution::uniform_standing_wave;
  double cloud_length = 0.0;          // m, metadata

  void validate() const;
  static EnsembleConfig reference_cloud();
};

enum class ClockState { f1, f2 };
enum class SlopeBranch { upper, lower };

/// Ensemble averages of the standing-wave Gaussian-mode coupling.
struct EnsembleFactors {
  double eta_eff_ratio = 0.0;      // eta_eff / eta_0 (includes the oscillator strength)
  double atom_number_ratio = 0.0;  // N_0 / N_a = <eta>^2 / <eta^2>
  double mean_eta_ratio = 0.0;     // <eta> / eta_0
  double mean_eta2_ratio = 0.0;    // <eta^2> / eta_0^2
};

/// Per-effective-atom scattering probabilities per transmitted probe photon.
struct StateScattering {
  double rayleigh = 0.0;
  double delta_f = 0.0;           // changes F, keeps m_F
  double delta_mf = 0.0;          // keeps F, changes m_F
  double delta_f_delta_mf = 0.0;  // changes both
  double incoherent_total = 0.0;  // sum_F' strength/Delta^2 route, for conservation checks

  [[nodiscard]] double raman() const { return delta_f + delta_mf + delta_f_delta_mf; }
  [[nodiscard]] double total() const { return rayleigh + raman(); }
};

struct ScatteringRates {
  double p_delta_f = 0.0;
  double p_delta_mf = 0.0;
  double p_delta_f_delta_mf = 0.0;
  double p_rayleigh_f1 = 0.0;
  double p_rayleigh_f2 = 0.0;
  double p_raman_total = 0.0;
  double p_total = 0.0;  // P_sc, atom in the clock superposition
  StateScattering from_f1;
  StateScattering from_f2;
};

struct DifferentialShift {
  double domega_dn = 0.0;           // kappa per effective atom of N = N_2 - N_1
  double effective_detuning = 0.0;  // delta', rad/s
};

struct CouplingSummary {
  double antinode_cooperativity = 0.0;   // eta_0
  double effective_cooperativity = 0.0;  // eta_eff
  double effective_atom_number = 0.0;    // N_0
  double shift_per_atom_f1 = 0.0;        // probe mode, kappa units
  double shift_per_atom_f2 = 0.0;
  double compensation_shift_f1 = 0.0;
  double compensation_shift_f2 = 0.0;
  double effective_detuning_f1 = 0.0;    // delta_F, rad/s
  double effective_detuning_f2 = 0.0;
  double domega_dn = 0.0;                // kappa per effective atom
  double effective_detuning = 0.0;       // delta', rad/s
  double phase_per_photon_antinode = 0.0;   // phi_0, rad
  double phase_per_photon_effective = 0.0;  // phi_eff, rad
  double finesse_from_geometry = 0.0;
};

/// Maximal single-atom cooperativity 24 F / (pi k^2 w^2).
double antinode_cooperativity(double finesse, double wavelength, double waist);

/// eta(rho, z) = eta_0 exp(-2 rho^2 / w^2) sin^2(k z).
double local_cooperativity(double eta0, double radial_offset, double axial_position, double waist,
                           double wavenumber);

EnsembleFactors ensemble_coupling(const EnsembleConfig& ensemble, double waist, double oscillator_strength);

/// Line-strength-weighted coupling of |F, m_F=0> to each F' for the
/// equal sigma+/sigma- probe; entries sum to the oscillator strength.
double clock_line_strength(int f, int f_prime);

/// Effective detuning delta_F reproducing sum_F' strength/Delta exactly.
/// `probe_detuning` is measured from the F=2 -> F'=3 line (rad/s).
double effective_detuning(ClockState state, double probe_detuning, const PhysicalConstants& constants);

/// Mode shift per effective atom in |F, m_F=0>, in units of kappa.
/// Throws std::domain_error within 100 Gamma of any contributing line.
double hyperfine_mode_shift(ClockState state, double probe_detuning, double eta_eff,
                            const PhysicalConstants& constants);

/// Shift per unit of N = N_counted - N_other, where the probe and (optional)
/// compensation sidebands are read out differentially.
DifferentialShift differential_shift(double probe_detuning, std::optional<double> compensation_detuning,
                                     double eta_eff, const PhysicalConstants& constants,
                                     ClockState counted_positive = ClockState::f2);

StateScattering scattering_from_state(ClockState state, double probe_detuning, double eta_eff,
                                      const PhysicalConstants& constants);

/// Free-space scattering per transmitted photon for an effective ensemble atom,
/// averaged over the two clock states.
ScatteringRates raman_rates(double probe_detuning, double eta_eff, const PhysicalConstants& constants);

/// b_1 = (4/3 P_dF + 1/2 P_dmF + 1/3 P_dFdmF) N_0.
double raman_noise_coefficient(const ScatteringRates& rates, double effective_atom_number);

double lorentzian_transmission(double detuning, double linewidth);
double inverse_transmission(double fraction, double linewidth, SlopeBranch branch);

/// phi = 2 (omega_1^(2) - omega_1^(1)) / kappa with shifts already in kappa units.
double phase_per_photon(double shift_f1, double shift_f2);

/// J0(u) cos(u) - J1(u) sin(u).
double ramsey_damping_envelope(double u);

CouplingSummary compute_coupling(const PhysicalConstants& constants, const ResonatorParams& resonator,
                                 const EnsembleConfig& ensemble, double probe_detuning,
                                 std::optional<double> compensation_detuning);

}  // namespace qnd
