#include "qnd/cavity.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qnd/angular.hpp"

namespace qnd {
namespace {

void require_positive(double v, const std::string& name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::domain_error(name + " must be positive and finite");
}

int state_f(ClockState s) { return s == ClockState::f1 ? 1 : 2; }

// Probe frequency minus the F -> F' transition frequency.
double line_detuning(int f, int f_prime, double probe_detuning, const PhysicalConstants& c) {
  return probe_detuning - c.transition_offset(f, f_prime);
}

bool couples(int f, int f_prime) { return std::abs(f - f_prime) <= 1; }

void check_dispersive(int f, double probe_detuning, const PhysicalConstants& c) {
  for (int fp = 0; fp <= 3; ++fp) {
    if (!couples(f, fp)) continue;
    const double d = line_detuning(f, fp, probe_detuning, c);
    if (std::abs(d) < 100.0 * c.gamma)
      throw std::domain_error("probe within 100 Gamma of F=" + std::to_string(f) + " -> F'=" + std::to_string(fp) +
                              ": dispersive approximation invalid");
  }
}

// sum_F' strength / Delta for |F, 0>, rad^-1 s.
double weighted_inverse_detuning(int f, double probe_detuning, const PhysicalConstants& c) {
  double sum = 0.0;
  for (int fp = 0; fp <= 3; ++fp) {
    const double s = clock_line_strength(f, fp);
    if (s == 0.0) continue;
    sum += s / line_detuning(f, fp, probe_detuning, c);
  }
  return sum;
}

}  // namespace

void ResonatorParams::validate(const PhysicalConstants& constants) const {
  require_positive(mirror_separation, "mirror_separation");
  require_positive(mirror_curvature, "mirror_curvature");
  require_positive(free_spectral_range, "free_spectral_range");
  for (const ResonatorBand* band : {&probe, &trap}) {
    require_positive(band->wavelength, "wavelength");
    require_positive(band->linewidth, "linewidth");
    require_positive(band->finesse, "finesse");
    require_positive(band->waist, "waist");
    const double geometric = std::numbers::pi * constants.speed_of_light / (mirror_separation * band->linewidth);
    if (std::abs(band->finesse - geometric) / band->finesse >= 1e-2)
      throw std::invalid_argument("finesse inconsistent with pi c/(L kappa): " + std::to_string(band->finesse) +
                                  " vs " + std::to_string(geometric));
  }
}

ResonatorParams ResonatorParams::reference_setup() {
  ResonatorParams r;
  r.mirror_separation = 26.62e-3;
  r.mirror_curvature = 25.04e-3;
  r.free_spectral_range = hz_to_angular(5632.0e6);
  r.transverse_mode_spacing = hz_to_angular(226.3e6);
  r.probe = {780.241209686e-9, hz_to_angular(1.01e6), 5.6e3, 56.9e-6};
  r.trap = {851e-9, hz_to_angular(135e3), 4.2e4, 59.5e-6};
  return r;
}

void EnsembleConfig::validate() const {
  if (!(physical_atom_number >= 0.0)) throw std::invalid_argument("physical_atom_number must be >= 0");
  if (!(rms_radius >= 0.0)) throw std::invalid_argument("rms_radius must be >= 0");
  if (!(cloud_length >= 0.0)) throw std::invalid_argument("cloud_length must be >= 0");
}

EnsembleConfig EnsembleConfig::reference_cloud() {
  EnsembleConfig e;
  e.physical_atom_number = 5e4;
  e.rms_radius = 8.1e-6;
  e.cloud_length = 1e-3;
  return e;
}

double antinode_cooperativity(double finesse, double wavelength, double waist) {
  require_positive(finesse, "finesse");
  require_positive(wavelength, "wavelength");
  require_positive(waist, "waist");
  const double k = two_pi / wavelength;
  return 24.0 * finesse / (std::numbers::pi * k * k * waist * waist);
}

double local_cooperativity(double eta0, double radial_offset, double axial_position, double waist,
                           double wavenumber) {
  require_positive(waist, "waist");
  const double s = std::sin(wavenumber * axial_position);
  return eta0 * std::exp(-2.0 * radial_offset * radial_offset / (waist * waist)) * s * s;
}

EnsembleFactors ensemble_coupling(const EnsembleConfig& ensemble, double waist, double oscillator_strength) {
  ensemble.validate();
  require_positive(waist, "waist");
  const double w2 = waist * waist;
  const double s2 = ensemble.rms_radius * ensemble.rms_radius;
  // Gaussian transverse density with rms sigma_r per axis:
  // <exp(-2 rho^2/w^2)> = w^2/(w^2+4 s^2), <exp(-4 rho^2/w^2)> = w^2/(w^2+8 s^2).
  const double radial1 = w2 / (w2 + 4.0 * s2);
  const double radial2 = w2 / (w2 + 8.0 * s2);
  constexpr double sin2 = 0.5;
  constexpr double sin4 = 0.375;
  EnsembleFactors out;
  out.mean_eta_ratio = sin2 * radial1;
  out.mean_eta2_ratio = sin4 * radial2;
  out.eta_eff_ratio = oscillator_strength * out.mean_eta2_ratio / out.mean_eta_ratio;
  out.atom_number_ratio = out.mean_eta_ratio * out.mean_eta_ratio / out.mean_eta2_ratio;
  return out;
}

double clock_line_strength(int f, int f_prime) {
  double s = 0.0;
  for (int q : {1, -1}) {
    const double d = angular::d2_dipole_element(f, 0, f_prime, q);
    s += 0.5 * d * d;
  }
  return s;
}

double effective_detuning(ClockState state, double probe_detuning, const PhysicalConstants& constants) {
  const int f = state_f(state);
  check_dispersive(f, probe_detuning, constants);
  return constants.oscillator_strength / weighted_inverse_detuning(f, probe_detuning, constants);
}

double hyperfine_mode_shift(ClockState state, double probe_detuning, double eta_eff,
                            const PhysicalConstants& constants) {
  const double delta = effective_detuning(state, probe_detuning, constants);
  return eta_eff * constants.gamma / (4.0 * delta);
}

DifferentialShift differential_shift(double probe_detuning, std::optional<double> compensation_detuning,
                                     double eta_eff, const PhysicalConstants& constants,
                                     ClockState counted_positive) {
  double s1 = hyperfine_mode_shift(ClockState::f1, probe_detuning, eta_eff, constants);
  double s2 = hyperfine_mode_shift(ClockState::f2, probe_detuning, eta_eff, constants);
  if (compensation_detuning) {
    s1 -= hyperfine_mode_shift(ClockState::f1, *compensation_detuning, eta_eff, constants);
    s2 -= hyperfine_mode_shift(ClockState::f2, *compensation_detuning, eta_eff, constants);
  }
  DifferentialShift out;
  out.domega_dn = 0.5 * (s2 - s1);
  if (counted_positive == ClockState::f1) out.domega_dn = -out.domega_dn;
  out.effective_detuning = eta_eff * constants.gamma / (4.0 * out.domega_dn);
  return out;
}

StateScattering scattering_from_state(ClockState state, double probe_detuning, double eta_eff,
                                      const PhysicalConstants& constants) {
  const int fi = state_f(state);
  check_dispersive(fi, probe_detuning, constants);
  const double norm = (eta_eff / constants.oscillator_strength) * constants.gamma * constants.gamma / 2.0;
  StateScattering out;
  for (int q : {1, -1}) {
    // Intermediate excited sublevel m' = q for an initial m_F = 0.
    for (int ff = 1; ff <= 2; ++ff) {
      for (int mf = -ff; mf <= ff; ++mf) {
        double amp = 0.0;
        for (int fp = 0; fp <= 3; ++fp) {
          if (std::abs(q) > fp) continue;
          const double di = angular::d2_dipole_element(fi, 0, fp, q);
          const double df = angular::d2_dipole_element(ff, mf, fp, q);
          if (di == 0.0 || df == 0.0) continue;
          amp += di * df / line_detuning(fi, fp, probe_detuning, constants);
        }
        const double prob = 0.5 * norm * amp * amp;
        if (ff == fi && mf == 0)
          out.rayleigh += prob;
        else if (mf == 0)
          out.delta_f += prob;
        else if (ff == fi)
          out.delta_mf += prob;
        else
          out.delta_f_delta_mf += prob;
      }
    }
    for (int fp = 0; fp <= 3; ++fp) {
      const double di = angular::d2_dipole_element(fi, 0, fp, q);
      const double dl = line_detuning(fi, fp, probe_detuning, constants);
      out.incoherent_total += 0.5 * norm * di * di / (dl * dl);
    }
  }
  return out;
}

ScatteringRates raman_rates(double probe_detuning, double eta_eff, const PhysicalConstants& constants) {
  ScatteringRates r;
  r.from_f1 = scattering_from_state(ClockState::f1, probe_detuning, eta_eff, constants);
  r.from_f2 = scattering_from_state(ClockState::f2, probe_detuning, eta_eff, constants);
  for (const StateScattering* s : {&r.from_f1, &r.from_f2}) {
    if (std::abs(s->total() - s->incoherent_total) > 1e-10 * s->incoherent_total)
      throw std::logic_error("scattering branching ratios do not conserve probability");
  }
  r.p_delta_f = 0.5 * (r.from_f1.delta_f + r.from_f2.delta_f);
  r.p_delta_mf = 0.5 * (r.from_f1.delta_mf + r.from_f2.delta_mf);
  r.p_delta_f_delta_mf = 0.5 * (r.from_f1.delta_f_delta_mf + r.from_f2.delta_f_delta_mf);
  r.p_rayleigh_f1 = r.from_f1.rayleigh;
  r.p_rayleigh_f2 = r.from_f2.rayleigh;
  r.p_raman_total = r.p_delta_f + r.p_delta_mf + r.p_delta_f_delta_mf;
  r.p_total = r.p_raman_total + 0.5 * (r.p_rayleigh_f1 + r.p_rayleigh_f2);
  return r;
}

double raman_noise_coefficient(const ScatteringRates& rates, double effective_atom_number) {
  return (4.0 / 3.0 * rates.p_delta_f + 0.5 * rates.p_delta_mf + rates.p_delta_f_delta_mf / 3.0) *
         effective_atom_number;
}

double lorentzian_transmission(double detuning, double linewidth) {
  require_positive(linewidth, "linewidth");
  const double x = 2.0 * detuning / linewidth;
  return 1.0 / (1.0 + x * x);
}

double inverse_transmission(double fraction, double linewidth, SlopeBranch branch) {
  require_positive(linewidth, "linewidth");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::domain_error("transmission fraction outside (0, 1]");
  const double mag = 0.5 * linewidth * std::sqrt(1.0 / fraction - 1.0);
  return branch == SlopeBranch::upper ? mag : -mag;
}

double phase_per_photon(double shift_f1, double shift_f2) { return 2.0 * (shift_f2 - shift_f1); }

double ramsey_damping_envelope(double u) {
  if (u < 0.0) throw std::domain_error("envelope argument must be >= 0");
  return std::cyl_bessel_j(0.0, u) * std::cos(u) - std::cyl_bessel_j(1.0, u) * std::sin(u);
}

CouplingSummary compute_coupling(const PhysicalConstants& constants, const ResonatorParams& resonator,
                                 const EnsembleConfig& ensemble, double probe_detuning,
                                 std::optional<double> compensation_detuning) {
  resonator.validate(constants);
  const double f = constants.oscillator_strength;
  const auto factors = ensemble_coupling(ensemble, resonator.probe.waist, f);

  CouplingSummary c;
  c.antinode_cooperativity =
      antinode_cooperativity(resonator.probe.finesse, resonator.probe.wavelength, resonator.probe.waist);
  c.effective_cooperativity = factors.eta_eff_ratio * c.antinode_cooperativity;
  c.effective_atom_number = factors.atom_number_ratio * ensemble.physical_atom_number;
  c.shift_per_atom_f1 = hyperfine_mode_shift(ClockState::f1, probe_detuning, c.effective_cooperativity, constants);
  c.shift_per_atom_f2 = hyperfine_mode_shift(ClockState::f2, probe_detuning, c.effective_cooperativity, constants);
  if (compensation_detuning) {
    c.compensation_shift_f1 =
        hyperfine_mode_shift(ClockState::f1, *compensation_detuning, c.effective_cooperativity, constants);
    c.compensation_shift_f2 =
        hyperfine_mode_shift(ClockState::f2, *compensation_detuning, c.effective_cooperativity, constants);
  }
  c.effective_detuning_f1 = effective_detuning(ClockState::f1, probe_detuning, constants);
  c.effective_detuning_f2 = effective_detuning(ClockState::f2, probe_detuning, constants);
  const auto diff = differential_shift(probe_detuning, compensation_detuning, c.effective_cooperativity, constants);
  c.domega_dn = diff.domega_dn;
  c.effective_detuning = diff.effective_detuning;
  // Antinode atom: eta_0 carries the full line strength f.
  const double eta_antinode = f * c.antinode_cooperativity;
  c.phase_per_photon_antinode =
      phase_per_photon(hyperfine_mode_shift(ClockState::f1, probe_detuning, eta_antinode, constants),
                       hyperfine_mode_shift(ClockState::f2, probe_detuning, eta_antinode, constants));
  c.phase_per_photon_effective = 4.0 * c.domega_dn;
  c.finesse_from_geometry =
      std::numbers::pi * constants.speed_of_light / (resonator.mirror_separation * resonator.probe.linewidth);
  return c;
}

}  // namespace qnd
