// Prints one PASS/FAIL line per acceptance criterion; exit status is the number of failures.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "qnd/analysis.hpp"
#include "qnd/cavity.hpp"
#include "qnd/config.hpp"
#include "qnd/limits.hpp"
#include "qnd/rng.hpp"
#include "qnd/scenarios.hpp"
#include "qnd/spin.hpp"

using namespace qnd;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    detail += (detail.empty() ? " " : "; ") + what + (ok ? "" : " [out of range]");
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool near(double v, double target, double tol) { return std::abs(v - target) <= tol; }

RunConfig reference_config() { return load_config(std::filesystem::path(QND_SOURCE_DIR) / "configs/reference.json"); }

Verdict cooperativity() {
  const auto r = ResonatorParams::reference_setup();
  const double e780 = antinode_cooperativity(r.probe.finesse, r.probe.wavelength, r.probe.waist);
  const double e851 = antinode_cooperativity(r.trap.finesse, r.trap.wavelength, r.trap.waist);
  Verdict v;
  v.require(near(e780, 0.203, 0.007), fmt("eta0(780) = %.4f", e780));
  v.require(near(e851, 1.65, 0.04), fmt("eta0(851) = %.3f", e851));
  return v;
}

Verdict coupling_chain() {
  const auto c = reference_config();
  const auto m = build_model(c);
  const auto f = ensemble_coupling(c.ensemble, c.resonator.probe.waist, c.constants.oscillator_strength);
  Verdict v;
  v.require(near(f.eta_eff_ratio, 0.47, 0.01), fmt("eta_eff/eta0 = %.4f", f.eta_eff_ratio));
  v.require(near(m.coupling.domega_dn, 4.5e-5, 0.2e-5), fmt("domega/dN = %.4g kappa", m.coupling.domega_dn));
  v.require(near(m.coupling.phase_per_photon_antinode * 1e6, 253, 8),
            fmt("phi0 = %.1f urad", m.coupling.phase_per_photon_antinode * 1e6));
  const std::array<std::pair<double, double>, 4> shifts = {{{m.coupling.shift_per_atom_f1, -49e-6},
                                                            {m.coupling.shift_per_atom_f2, 39e-6},
                                                            {m.coupling.compensation_shift_f1, -4.6e-6},
                                                            {m.coupling.compensation_shift_f2, -5.8e-6}}};
  double worst = 0.0;
  for (const auto& [got, want] : shifts) worst = std::max(worst, std::abs(got / want - 1.0));
  v.require(worst <= 0.15, fmt("shift table worst deviation %.1f%%", 100 * worst));
  return v;
}

Verdict scattering() {
  const auto c = reference_config();
  const auto m = build_model(c);
  const double ratio = m.rates.p_total / m.rates.p_raman_total;
  const double b1 = raman_noise_coefficient(m.rates, m.n0) / m.n0;
  Verdict v;
  v.require(near(m.rates.p_raman_total, 5.6e-8, 0.2 * 5.6e-8), fmt("P_Ram = %.4g", m.rates.p_raman_total));
  v.require(near(ratio, 3.0, 0.4), fmt("P_sc/P_Ram = %.3f", ratio));
  v.require(near(b1, 4.7e-8, 0.2 * 4.7e-8), fmt("b1/N0 = %.4g", b1));
  return v;
}

// 2 Var(M1 - M2) with its standard error, atom units.
Estimate meas2(const TrialSet& set) {
  const auto v = variance_stats(set);
  return {4.0 * v.var_meas.value, 4.0 * v.var_meas.se};
}

Verdict noise_budget_mc() {
  constexpr double n0 = 3.3e4, p = 6.4e5;
  EngineParams quiet;
  quiet.n0 = n0;
  quiet.domega_dn = 4.494e-5;
  quiet.phi_eff = 1.8e-4;
  quiet.mu_lock = 0.0;
  quiet.probe.photons_per_measurement = p;
  quiet.probe.shot_noise = quiet.probe.electronic_noise = quiet.probe.technical_noise = false;
  const double k = quiet.k_factor();

  Verdict v;
  std::uint64_t seed = 4000;
  const std::array<const char*, 5> names = {"b-1/p", "b-2/p^2", "b0_tech", "b0_mu", "b1 p"};
  const std::array<std::function<double(EngineParams&)>, 5> sources = {
      [&](EngineParams& e) {
        e.probe.shot_noise = true;
        return 2.0 * e.probe.apd_excess_factor / e.probe.quantum_efficiency * k * k / p;
      },
      [&](EngineParams& e) {
        e.probe.electronic_noise = true;
        return e.probe.electronic_b_minus2 / (p * p);
      },
      [&](EngineParams& e) {
        e.probe.technical_noise = true;
        return e.probe.technical_noise_fraction * n0;
      },
      [&](EngineParams& e) {
        e.pulse.composite_pi_infidelity = 0.02;
        return 0.02 * n0;
      },
      [&](EngineParams& e) {
        e.rates = {2.630e-8, 1.459e-8, 1.539e-8};
        return (4.0 / 3.0 * e.rates.delta_f + 0.5 * e.rates.delta_mf + e.rates.delta_f_delta_mf / 3.0) * n0 * p;
      }};
  for (std::size_t i = 0; i < sources.size(); ++i) {
    auto e = quiet;
    const double want = sources[i](e);
    const auto got = meas2(run_trials(e, SequencePlan::squeeze_readout(), 10000, ++seed));
    const double z = (got.value - want) / got.se;
    v.require(std::abs(z) <= 3.0, std::string(names[i]) + fmt(" %.1f vs %.1f (%+.2f SE)", got.value, want, z));
  }

  // Spin-flip covariance structure at lambda = p P = 1e-3, 1e5 trials per case.
  const double lam = 1e-3;
  const std::array<std::array<double, 4>, 4> cases = {
      {{lam / p, 0, 0, 0}, {0, lam / p, 0, 0}, {0, 0, lam / p, 0}, {0.4 * lam / p, 0.4 * lam / p, 0.4 * lam / p, 2e-3}}};
  constexpr std::array<Slot, 4> order = {Slot::m1m, Slot::m1p, Slot::m2p, Slot::m2m};
  int ok = 0, n = 0;
  for (const auto& cs : cases) {
    auto e = quiet;
    e.rates = {cs[0], cs[1], cs[2]};
    e.pulse.composite_pi_infidelity = cs[3];
    const auto set = run_trials(e, SequencePlan::squeeze_readout(), 100000, ++seed);
    const auto an = spinflip_covariance_analytic(cs[0], cs[1], cs[2], cs[3], p, n0);
    const auto& r = an.mean_flip_probability;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) {
        const double nn = static_cast<double>(set.records.size());
        double m = 0.0, s = 0.0;
        for (const auto& t : set.records) m += t.pulse(order[a]) - t.pulse(order[b]);
        m /= nn;
        for (const auto& t : set.records) {
          const double d = t.pulse(order[a]) - t.pulse(order[b]) - m;
          s += d * d;
        }
        s /= nn - 1.0;
        const double want = n0 * (r(a, b) - 0.5 * (r(a, a) + r(b, b)));
        // Absolute slack for pairs whose variance is exactly zero (sums of equal doubles).
        ok += std::abs(s - want) <= 3.0 * s * std::sqrt(2.0 / (nn - 1.0)) + 1e-9 ? 1 : 0;
        ++n;
      }
    const auto got = meas2(set);
    ok += std::abs(got.value - an.var_meas_term) <= 3.0 * got.se ? 1 : 0;
    ++n;
  }
  v.require(ok == n, fmt("flip covariance: %.0f/%.0f pairwise checks within 3 SE", ok, n));
  return v;
}

Verdict conditional_squeezing(double& zeta_m_inv, double& zeta_e_inv) {
  const auto c = reference_config();
  const auto m = build_model(c);
  const auto budget = analytic_noise_budget(m.engine);
  Verdict v;
  v.require(budget[NoiseTerm::b_minus2].value == 6e13 && near(budget[NoiseTerm::b0_tech].value / m.n0, 0.04, 1e-12) &&
                near(budget[NoiseTerm::b0_mu].value / m.n0, 0.02, 1e-12),
            fmt("budget b-2 = %.3g, b0 = (%.3f + %.3f) N0", budget[NoiseTerm::b_minus2].value,
                budget[NoiseTerm::b0_tech].value / m.n0, budget[NoiseTerm::b0_mu].value / m.n0));
  const auto pt = readout_point(m, c, 6.4e5, point_seed(c.master_seed, 0));
  const auto& s = pt.squeezing;
  const double raw = to_db(s.sigma2 * (1.0 - s.epsilon_p) * (1.0 - s.epsilon_p));
  v.require(near(s.sigma2_db(), -8.9, 1.0),
            fmt("sigma2(6.4e5) = %.2f dB (+- %.2f dB stat)", s.sigma2_db(), 10.0 / std::log(10.0) * pt.sigma2_se / s.sigma2));
  v.require(s.sigma2_db() - raw >= 0.2 && s.sigma2_db() - raw <= 0.4,
            fmt("(1-eps)^2 shift %+.2f dB, eps = %.4f", s.sigma2_db() - raw, s.epsilon_p));
  const auto at3 = readout_point(m, c, 3e5, point_seed(c.master_seed, 1));
  zeta_m_inv = -at3.squeezing.zeta_m_db();
  zeta_e_inv = -at3.squeezing.zeta_e_db();
  return v;
}

Verdict metrological_gain(double zeta_m_inv, double zeta_e_inv) {
  Verdict v;
  v.require(near(zeta_m_inv, 3.0, 1.5), fmt("1/zeta_m(3e5) = %.2f dB", zeta_m_inv));
  v.require(near(zeta_e_inv, 4.2, 1.5), fmt("1/zeta_e(3e5) = %.2f dB", zeta_e_inv));
  return v;
}

Verdict fundamental_limits() {
  // Rates per photon at the reference detuning, with P_sc = 3 P_Ram exactly.
  const auto m = build_model(reference_config());
  LimitInputs in;
  in.collective_cooperativity = 3100;
  in.phi_eff = m.coupling.phase_per_photon_effective;
  in.p_raman = m.rates.p_raman_total;
  in.p_scatter = 3.0 * in.p_raman;
  in.rayleigh_f1 = m.rates.p_rayleigh_f1;
  in.rayleigh_f2 = m.rates.p_rayleigh_f2;
  const auto r = limit_contrast_and_zeta(in);
  const auto curve = integrate_sigma2(in, 20.0 * r.p_opt, 400);
  const double lowest = *std::min_element(curve.sigma2.begin(), curve.sigma2.end());
  Verdict v;
  v.require(near(to_db(r.sigma2_min), -18.3, 0.2), fmt("sigma2_min = %.2f dB", to_db(r.sigma2_min)));
  v.require(near(r.p_opt_p_raman, 0.012, 0.001), fmt("p_opt P_Ram = %.4f", r.p_opt_p_raman));
  v.require(near(r.contrast_loss, 0.012, 0.002), fmt("contrast loss = %.4f", r.contrast_loss));
  v.require(std::abs(lowest / r.sigma2_min - 1.0) <= 1e-3, fmt("ODE/closed form - 1 = %.1e", lowest / r.sigma2_min - 1.0));
  return v;
}

Verdict properties() {
  Verdict v;
  std::mt19937_64 rng = make_stream(8, StreamDomain::synthetic, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  // Gaussian-state operations keep the covariance PSD; rotations keep |<S>| and det(cov).
  bool psd = true, invariant = true;
  ScatteringRates rates;
  rates.p_delta_f = 2.6e-8;
  rates.p_delta_mf = 1.5e-8;
  rates.p_delta_f_delta_mf = 1.5e-8;
  for (int i = 0; i < 500; ++i) {
    PreparationModel prep;
    prep.prep_noise_factor = 1.0 + u(rng);
    prep.initial_contrast = 0.5 + 0.5 * u(rng);
    auto s = prepare_css(1e3 + 1e5 * u(rng), prep);
    s = measurement_backaction(s, 1e6 * u(rng), 2e-4 * u(rng));
    s = condition_on_measurement(s, 100.0 * (u(rng) - 0.5), 1.0 + 1e4 * u(rng));
    PulseModel pm;
    pm.composite_pi_infidelity = 0.05 * u(rng);
    s = composite_pi(s, pm);
    s = raman_flip_update(s, rates, 1e6 * u(rng));
    psd = psd && s.is_psd();
    const auto axis = static_cast<RotationAxis>(i % 4);
    const auto t = rotate(s, axis, 2.0 * M_PI * u(rng));
    psd = psd && t.is_psd();
    invariant = invariant && std::abs(t.mean.norm() / s.mean.norm() - 1.0) < 1e-12 &&
                std::abs(t.cov.determinant() - s.cov.determinant()) <= 1e-9 * std::abs(s.cov.determinant()) + 1e-300;
  }
  v.require(psd, "covariance PSD");
  v.require(invariant, "rotation invariants");

  // Conditional variance bounded by both inputs; zeta_e <= zeta_m.
  bool bound = true, order = true;
  for (int i = 0; i < 2000; ++i) {
    const double vp = 1.0 + 1e4 * u(rng), vm = 1.0 + 1e4 * u(rng);
    bound = bound && conditional_variance(vp, vm, 0.0) <= std::min(vp, vm) * (1.0 + 1e-15);
    // Physical domain: the flip-corrected contrast C_meas / (1 - eps) never exceeds C_in.
    const double c_in = 0.3 + 0.7 * u(rng), eps = 0.1 * u(rng);
    const SqueezingInputs in{vp, vm, 5e3, (1.0 - eps) * c_in * (0.2 + 0.8 * u(rng)), c_in, eps};
    const auto s = squeezing_parameters(in);
    order = order && s.zeta_e <= s.zeta_m * (1.0 + 1e-12);
  }
  v.require(bound, "conditional-variance bound");
  v.require(order, "zeta_e <= zeta_m");

  // Ramsey envelope against a midpoint quadrature of its integral form.
  double env = 0.0;
  for (double x : {0.1, 1.0, 5.0, 20.0}) {
    const int n = 4096;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
      const double th = M_PI * i / n, s2 = std::sin(th) * std::sin(th);
      num += std::cos(2.0 * x * s2) * s2;
      den += s2;
    }
    env = std::max(env, std::abs(ramsey_damping_envelope(x) - num / den));
  }
  v.require(env < 1e-8, fmt("envelope vs quadrature %.1e", env));

  // Lorentzian round trip on both slopes.
  double rt = 0.0;
  for (int i = 1; i < 200; ++i) {
    const double d = 2.0 * i / 200.0;
    for (auto b : {SlopeBranch::upper, SlopeBranch::lower}) {
      const double x = b == SlopeBranch::upper ? d : -d;
      rt = std::max(rt, std::abs(inverse_transmission(lorentzian_transmission(x, 1.0), 1.0, b) - x));
    }
  }
  v.require(rt < 1e-12, fmt("Lorentzian round trip %.1e", rt));

  // Run reproducibility under different thread counts.
  EngineParams e;
  e.rates = {2.6e-8, 2e-8, 1e-8};
  e.prep_quadratic = 3e-6;
  const auto a = run_trials(e, SequencePlan::double_prep(), 257, 11, 1);
  const auto b = run_trials(e, SequencePlan::double_prep(), 257, 11, 5);
  bool same = a.records.size() == b.records.size();
  for (std::size_t i = 0; same && i < a.records.size(); ++i)
    same = std::memcmp(a.records[i].pulses.data(), b.records[i].pulses.data(), sizeof(double) * kSlotCount) == 0;
  v.require(same, "bitwise reproducibility 1 vs 5 threads");

  // Fit recovery: chi^2 of 100 synthetic noise-budget fits follows its distribution.
  NoiseBudget truth;
  truth[NoiseTerm::b_minus2].value = 6e13;
  truth[NoiseTerm::b_minus1].value = 1.09e9;
  truth[NoiseTerm::b0_tech].value = 1320;
  truth[NoiseTerm::b0_mu].value = 660;
  truth[NoiseTerm::b1].value = 1.55e-3;
  NoiseConstraints cons;
  cons.fixed[static_cast<std::size_t>(NoiseTerm::b0_mu)] = 660.0;
  double chi2 = 0.0;
  int dof = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto g = make_stream(seed, StreamDomain::synthetic, 1);
    std::normal_distribution<double> nd;
    std::vector<NoisePoint> pts;
    for (double p : {5e4, 1e5, 2e5, 3e5, 4.5e5, 6.4e5, 9e5, 1.3e6}) {
      const double y = truth.evaluate(p), s = 0.02 * y;
      pts.push_back({p, y + s * nd(g), s});
    }
    const auto fit = fit_noise_model(pts, cons);
    chi2 += fit.chi2;
    dof += fit.dof;
  }
  const double pv = boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), chi2));
  v.require(pv > 0.01 && pv < 0.99, fmt("fit chi2 %.1f / %.0f dof, p = %.3f", chi2, dof, pv));
  return v;
}

}  // namespace

int main() {
  int failures = 0;
  double zm = 0.0, ze = 0.0;
  const auto report = [&](int id, const char* name, const std::function<Verdict()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s:%s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  };
  report(1, "cooperativity", cooperativity);
  report(2, "coupling chain", coupling_chain);
  report(3, "scattering", scattering);
  report(4, "noise-budget Monte Carlo", noise_budget_mc);
  report(5, "conditional squeezing", [&] { return conditional_squeezing(zm, ze); });
  report(6, "metrological gain", [&] { return metrological_gain(zm, ze); });
  report(7, "fundamental limits", fundamental_limits);
  report(8, "property suites", properties);
  return failures;
}
